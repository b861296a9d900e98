//! DrivingWorld: a tabular grid domain with ice, cones, parked cars and walls.
//!
//! The car moves upward every step. Cells are `[col, row]` with the origin at
//! the bottom-left. Entering a goal, parked car, wall or leaving the grid ends
//! the episode; cones cost a penalty but are passable. Acting from an ice cell
//! slips the whole move one column left or right with probability `slip / 2`
//! each.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::path::Path;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oomdp::{mask, Construal, FeatureValue, Object, ObjectState};
use crate::rng::{rng_for, Rng};

pub type Cell = [i32; 2];

/// Ground-truth discount.
pub const DEFAULT_DISCOUNT: f64 = 0.95;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Action {
    Up1,
    Up2,
    DiagLeft,
    DiagRight,
}

impl Action {
    pub const ALL: [Action; 4] = [Action::Up1, Action::Up2, Action::DiagLeft, Action::DiagRight];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Action {
        Action::ALL[i]
    }

    /// Cells entered, relative to the current cell, in order.
    fn path(self) -> &'static [[i32; 2]] {
        match self {
            Action::Up1 => &[[0, 1]],
            Action::Up2 => &[[0, 1], [0, 2]],
            Action::DiagLeft => &[[-1, 1]],
            Action::DiagRight => &[[1, 1]],
        }
    }

    fn cost(self, r: &Rewards) -> f64 {
        match self {
            Action::Up1 => r.up1,
            Action::Up2 => r.up2,
            Action::DiagLeft | Action::DiagRight => r.diag,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Rewards {
    pub goal: f64,
    pub parked: f64,
    pub wall: f64,
    pub cone: f64,
    pub up1: f64,
    pub up2: f64,
    pub diag: f64,
}

impl Default for Rewards {
    fn default() -> Self {
        Rewards {
            goal: 100.0,
            parked: -100.0,
            wall: -100.0,
            cone: -10.0,
            up1: -1.0,
            up2: -1.0,
            diag: -2.0,
        }
    }
}

fn default_slip() -> f64 {
    0.4
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridScenario {
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub id: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    pub width: i32,
    pub height: i32,
    pub ego_start: Cell,
    pub goal: Cell,
    #[serde(default)]
    pub ice: Vec<Cell>,
    #[serde(default)]
    pub cones: Vec<Cell>,
    #[serde(default)]
    pub parked: Vec<Cell>,
    #[serde(default)]
    pub walls: Vec<Cell>,
    #[serde(default)]
    pub rewards: Rewards,
    /// Total slip probability, split evenly between left and right.
    #[serde(default = "default_slip")]
    pub slip: f64,
}

impl GridScenario {
    pub fn empty(id: &str, width: i32, height: i32, ego_start: Cell, goal: Cell) -> Self {
        GridScenario {
            id: id.to_string(),
            description: String::new(),
            width,
            height,
            ego_start,
            goal,
            ice: vec![],
            cones: vec![],
            parked: vec![],
            walls: vec![],
            rewards: Rewards::default(),
            slip: default_slip(),
        }
    }

    pub fn slip_each_side(&self) -> f64 {
        self.slip / 2.0
    }

    pub fn in_grid(&self, c: Cell) -> bool {
        c[0] >= 0 && c[1] >= 0 && c[0] < self.width && c[1] < self.height
    }

    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        if self.width < 1 || self.height < 1 {
            problems.push(format!("grid must be non-empty, got {}x{}", self.width, self.height));
        }
        if !(0.0..=1.0).contains(&self.slip) {
            problems.push(format!("slip probability {} outside [0, 1]", self.slip));
        }
        let mut seen: BTreeMap<Cell, &str> = BTreeMap::new();
        let groups: [(&str, &[Cell]); 6] = [
            ("ego_start", std::slice::from_ref(&self.ego_start)),
            ("goal", std::slice::from_ref(&self.goal)),
            ("ice", &self.ice),
            ("cones", &self.cones),
            ("parked", &self.parked),
            ("walls", &self.walls),
        ];
        for (name, cells) in groups {
            for &c in cells {
                if !self.in_grid(c) {
                    problems.push(format!("{name} cell {c:?} outside the grid"));
                }
                if let Some(prev) = seen.insert(c, name) {
                    problems.push(format!("cell {c:?} is used by both {prev} and {name}"));
                }
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(problems))
        }
    }

    /// Ice patches: 4-connected components of ice cells, ordered by their
    /// smallest cell.
    pub fn ice_patches(&self) -> Vec<Vec<Cell>> {
        let cells: BTreeSet<Cell> = self.ice.iter().copied().collect();
        let mut seen = BTreeSet::new();
        let mut patches = Vec::new();
        for &c in &cells {
            if !seen.insert(c) {
                continue;
            }
            let mut patch = vec![c];
            let mut stack = vec![c];
            while let Some(p) = stack.pop() {
                for d in [[1, 0], [-1, 0], [0, 1], [0, -1]] {
                    let n = [p[0] + d[0], p[1] + d[1]];
                    if cells.contains(&n) && seen.insert(n) {
                        patch.push(n);
                        stack.push(n);
                    }
                }
            }
            patch.sort_by_key(|c| (c[1], c[0]));
            patches.push(patch);
        }
        patches.sort_by_key(|p| (p[0][1], p[0][0]));
        patches
    }

    /// Construable objects with their ids and cells, in id order. Each ice
    /// patch is one object; cones and parked cars are one object per cell.
    pub fn construable_objects(&self) -> Vec<(String, CellKind, Vec<Cell>)> {
        let mut out: Vec<_> = self
            .ice_patches()
            .into_iter()
            .enumerate()
            .map(|(i, cells)| (format!("ice{i}"), CellKind::Ice, cells))
            .collect();
        for (prefix, kind, cells) in [
            ("cone", CellKind::Cone, &self.cones),
            ("parked", CellKind::Parked, &self.parked),
        ] {
            out.extend(
                cells
                    .iter()
                    .enumerate()
                    .map(|(i, &c)| (format!("{prefix}{i}"), kind, vec![c])),
            );
        }
        out.sort_by(|a, b| a.0.cmp(&b.0));
        out
    }

    /// The object-oriented start state. Ice, cones and parked cars are
    /// construable; ego, goal and walls are not.
    pub fn object_state(&self) -> ObjectState {
        let pos = |c: Cell| FeatureValue::Vector(vec![c[0] as f64, c[1] as f64]);
        let mut objects = BTreeMap::new();
        objects.insert("ego".to_string(), Object::new("ego").with("pos", pos(self.ego_start)));
        objects.insert("goal".to_string(), Object::new("goal").with("pos", pos(self.goal)));
        for (i, &c) in self.walls.iter().enumerate() {
            objects.insert(format!("wall{i}"), Object::new("wall").with("pos", pos(c)));
        }
        let mut construable = BTreeSet::new();
        for (id, kind, cells) in self.construable_objects() {
            let flat = cells.iter().flat_map(|c| [c[0] as f64, c[1] as f64]).collect();
            objects.insert(
                id.clone(),
                Object::new(kind.class())
                    .with("pos", pos(cells[0]))
                    .with("cells", FeatureValue::Vector(flat)),
            );
            construable.insert(id);
        }
        ObjectState::new(objects, construable).expect("scenario objects are well formed")
    }

    pub fn full_construal(&self) -> Construal {
        self.construable_objects().into_iter().map(|(id, _, _)| id).collect()
    }

    pub fn n_cells(&self) -> usize {
        (self.width * self.height) as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CellKind {
    Road,
    Ice,
    Cone,
    Parked,
    Wall,
    Goal,
}

impl CellKind {
    pub fn class(self) -> &'static str {
        match self {
            CellKind::Road => "road",
            CellKind::Ice => "ice",
            CellKind::Cone => "cone",
            CellKind::Parked => "parked",
            CellKind::Wall => "wall",
            CellKind::Goal => "goal",
        }
    }

    fn from_class(class: &str) -> Option<CellKind> {
        Some(match class {
            "ice" => CellKind::Ice,
            "cone" => CellKind::Cone,
            "parked" => CellKind::Parked,
            "wall" => CellKind::Wall,
            "goal" => CellKind::Goal,
            _ => return None,
        })
    }

    pub fn is_terminal(self) -> bool {
        matches!(self, CellKind::Parked | CellKind::Wall | CellKind::Goal)
    }
}

/// Dense per-cell contents of a (possibly masked) scenario.
#[derive(Clone, Debug)]
pub struct Layout {
    width: i32,
    height: i32,
    kinds: Vec<CellKind>,
    between_cones: Vec<bool>,
}

impl Layout {
    pub fn from_state(width: i32, height: i32, state: &ObjectState) -> Layout {
        let mut kinds = vec![CellKind::Road; (width * height) as usize];
        for obj in state.objects().values() {
            let Some(kind) = CellKind::from_class(&obj.class) else {
                continue;
            };
            let Some(cells) = obj.vector("cells").or_else(|| obj.vector("pos")) else {
                continue;
            };
            for p in cells.chunks_exact(2) {
                let c = [p[0] as i32, p[1] as i32];
                if c[0] >= 0 && c[1] >= 0 && c[0] < width && c[1] < height {
                    kinds[(c[1] * width + c[0]) as usize] = kind;
                }
            }
        }
        let mut layout = Layout {
            width,
            height,
            kinds,
            between_cones: vec![],
        };
        layout.between_cones = (0..width * height)
            .map(|i| {
                let c = [i % width, i / width];
                layout.kind(c) == Some(CellKind::Ice)
                    && layout.kind([c[0] - 1, c[1]]) == Some(CellKind::Cone)
                    && layout.kind([c[0] + 1, c[1]]) == Some(CellKind::Cone)
            })
            .collect();
        layout
    }

    pub fn of(scenario: &GridScenario, c: &Construal) -> Result<Layout> {
        let masked = mask(&scenario.object_state(), c)?;
        Ok(Layout::from_state(scenario.width, scenario.height, &masked))
    }

    pub fn kind(&self, c: Cell) -> Option<CellKind> {
        if c[0] < 0 || c[1] < 0 || c[0] >= self.width || c[1] >= self.height {
            None
        } else {
            Some(self.kinds[(c[1] * self.width + c[0]) as usize])
        }
    }

    /// An ice cell whose immediate left and right neighbours are cones.
    pub fn is_ice_between_cones(&self, c: Cell) -> bool {
        self.kind(c).is_some()
            && self.between_cones[(c[1] * self.width + c[0]) as usize]
    }
}

/// One possible result of taking an action.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Outcome {
    pub prob: f64,
    /// Last cell entered (may be off-grid when the episode ends there).
    pub cell: Cell,
    pub reward: f64,
    pub done: bool,
    /// Ice cells entered along the way.
    pub ice_entered: u32,
    /// Ice-between-cones cells entered along the way.
    pub ice_cone_entered: u32,
}

fn resolve(layout: &Layout, rewards: &Rewards, from: Cell, action: Action, dx: i32) -> Outcome {
    let mut out = Outcome {
        prob: 1.0,
        cell: from,
        reward: action.cost(rewards),
        done: false,
        ice_entered: 0,
        ice_cone_entered: 0,
    };
    for d in action.path() {
        let c = [from[0] + d[0] + dx, from[1] + d[1]];
        out.cell = c;
        match layout.kind(c) {
            None => {
                out.done = true;
                break;
            }
            Some(CellKind::Wall) => {
                out.reward += rewards.wall;
                out.done = true;
                break;
            }
            Some(CellKind::Parked) => {
                out.reward += rewards.parked;
                out.done = true;
                break;
            }
            Some(CellKind::Goal) => {
                out.reward += rewards.goal;
                out.done = true;
                break;
            }
            Some(CellKind::Cone) => out.reward += rewards.cone,
            Some(CellKind::Ice) => {
                out.ice_entered += 1;
                if layout.is_ice_between_cones(c) {
                    out.ice_cone_entered += 1;
                }
            }
            Some(CellKind::Road) => {}
        }
    }
    out
}

/// Outcome distribution of `action` from `from` under `layout`.
pub fn outcomes(
    layout: &Layout,
    rewards: &Rewards,
    slip_each_side: f64,
    from: Cell,
    action: Action,
) -> Vec<Outcome> {
    if layout.kind(from) == Some(CellKind::Ice) && slip_each_side > 0.0 {
        [(-1, slip_each_side), (0, 1.0 - 2.0 * slip_each_side), (1, slip_each_side)]
            .into_iter()
            .filter(|&(_, p)| p > 0.0)
            .map(|(dx, p)| Outcome {
                prob: p,
                ..resolve(layout, rewards, from, action, dx)
            })
            .collect()
    } else {
        vec![resolve(layout, rewards, from, action, 0)]
    }
}

/// Extra per-entry rewards layered on top of the scenario reward.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CompileOptions {
    pub discount: f64,
    pub ice_bonus: f64,
    pub ice_cone_bonus: f64,
}

impl Default for CompileOptions {
    fn default() -> Self {
        CompileOptions {
            discount: DEFAULT_DISCOUNT,
            ice_bonus: 0.0,
            ice_cone_bonus: 0.0,
        }
    }
}

/// A finite MDP over grid cells plus one absorbing terminal state.
#[derive(Clone, Debug)]
pub struct TabularMDP {
    pub width: i32,
    pub height: i32,
    pub n_states: usize,
    pub terminal: usize,
    /// `T(s'|s,a)` at `(s * 4 + a) * n_states + s'`.
    pub transition: Vec<f64>,
    /// `R(s,a)` at `s * 4 + a`.
    pub reward: Vec<f64>,
    pub discount: f64,
}

impl TabularMDP {
    pub const N_ACTIONS: usize = 4;

    pub fn state_of(&self, c: Cell) -> Option<usize> {
        if c[0] < 0 || c[1] < 0 || c[0] >= self.width || c[1] >= self.height {
            None
        } else {
            Some((c[1] * self.width + c[0]) as usize)
        }
    }

    pub fn cell_of(&self, s: usize) -> Option<Cell> {
        (s != self.terminal).then(|| [s as i32 % self.width, s as i32 / self.width])
    }

    pub fn row(&self, s: usize, a: usize) -> &[f64] {
        let start = (s * Self::N_ACTIONS + a) * self.n_states;
        &self.transition[start..start + self.n_states]
    }

    pub fn r(&self, s: usize, a: usize) -> f64 {
        self.reward[s * Self::N_ACTIONS + a]
    }

    /// Sparse successors `(s', p)` of `(s, a)`.
    pub fn successors(&self, s: usize, a: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.row(s, a)
            .iter()
            .enumerate()
            .filter(|(_, &p)| p != 0.0)
            .map(|(i, &p)| (i, p))
    }
}

fn build_mdp(scenario: &GridScenario, layout: &Layout, opts: &CompileOptions) -> TabularMDP {
    let n_cells = scenario.n_cells();
    let n = n_cells + 1;
    let terminal = n_cells;
    let mut transition = vec![0.0; n * 4 * n];
    let mut reward = vec![0.0; n * 4];
    let slip = scenario.slip_each_side();
    for s in 0..n {
        for a in 0..4 {
            let base = (s * 4 + a) * n;
            if s == terminal {
                transition[base + terminal] = 1.0;
                continue;
            }
            let cell = [s as i32 % scenario.width, s as i32 / scenario.width];
            if layout.kind(cell).is_some_and(CellKind::is_terminal) {
                transition[base + terminal] = 1.0;
                continue;
            }
            let mut r = 0.0;
            for o in outcomes(layout, &scenario.rewards, slip, cell, Action::from_index(a)) {
                let bonus = opts.ice_bonus * o.ice_entered as f64
                    + opts.ice_cone_bonus * o.ice_cone_entered as f64;
                r += o.prob * (o.reward + bonus);
                let next = if o.done {
                    terminal
                } else {
                    (o.cell[1] * scenario.width + o.cell[0]) as usize
                };
                transition[base + next] += o.prob;
            }
            reward[s * 4 + a] = r;
        }
    }
    TabularMDP {
        width: scenario.width,
        height: scenario.height,
        n_states: n,
        terminal,
        transition,
        reward,
        discount: opts.discount,
    }
}

/// The MDP induced by the construed state `s[C]`.
pub fn compile(scenario: &GridScenario, c: &Construal) -> Result<TabularMDP> {
    compile_with(scenario, c, &CompileOptions::default())
}

pub fn compile_with(
    scenario: &GridScenario,
    c: &Construal,
    opts: &CompileOptions,
) -> Result<TabularMDP> {
    scenario.validate()?;
    if !(0.0..1.0).contains(&opts.discount) {
        return Err(Error::InvalidParameter(format!(
            "discount {} outside [0, 1)",
            opts.discount
        )));
    }
    let layout = Layout::of(scenario, c)?;
    Ok(build_mdp(scenario, &layout, opts))
}

/// The true (un-construed) MDP.
pub fn compile_true(scenario: &GridScenario) -> Result<TabularMDP> {
    compile(scenario, &scenario.full_construal())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Transition {
    pub next: Cell,
    pub reward: f64,
    pub done: bool,
}

/// Samples the true scenario dynamics.
#[derive(Clone, Debug)]
pub struct World {
    scenario: GridScenario,
    layout: Layout,
}

impl World {
    pub fn new(scenario: &GridScenario) -> Result<World> {
        scenario.validate()?;
        Ok(World {
            layout: Layout::of(scenario, &scenario.full_construal())?,
            scenario: scenario.clone(),
        })
    }

    pub fn scenario(&self) -> &GridScenario {
        &self.scenario
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    pub fn is_terminal(&self, s: Cell) -> bool {
        self.layout.kind(s).is_none_or(CellKind::is_terminal)
    }

    pub fn step(&self, s: Cell, a: Action, rng: &mut Rng) -> Result<Transition> {
        if self.is_terminal(s) {
            return Err(Error::StepOnTerminal(s));
        }
        let outs = outcomes(
            &self.layout,
            &self.scenario.rewards,
            self.scenario.slip_each_side(),
            s,
            a,
        );
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut chosen = outs[outs.len() - 1];
        for o in &outs {
            acc += o.prob;
            if u < acc {
                chosen = *o;
                break;
            }
        }
        Ok(Transition {
            next: chosen.cell,
            reward: chosen.reward,
            done: chosen.done,
        })
    }
}

pub fn true_step(scenario: &GridScenario, s: Cell, a: Action, rng: &mut Rng) -> Result<Transition> {
    World::new(scenario)?.step(s, a, rng)
}

pub fn load_scenario(path: impl AsRef<Path>) -> Result<GridScenario> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let scenario: GridScenario = serde_json::from_str(&text).map_err(|source| Error::Parse {
        path: path.display().to_string(),
        source,
    })?;
    scenario.validate()?;
    Ok(scenario)
}

pub fn save_scenario(path: impl AsRef<Path>, scenario: &GridScenario) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(scenario)? + "\n")?;
    Ok(())
}

/// Whether the goal is reachable by deterministic moves that avoid parked
/// cars, walls and the grid edge.
pub fn goal_reachable(scenario: &GridScenario) -> bool {
    let Ok(world) = World::new(scenario) else {
        return false;
    };
    let mut seen = vec![false; scenario.n_cells()];
    let mut queue = VecDeque::from([scenario.ego_start]);
    while let Some(c) = queue.pop_front() {
        for a in Action::ALL {
            let o = resolve(&world.layout, &scenario.rewards, c, a, 0);
            if o.done {
                if o.cell == scenario.goal {
                    return true;
                }
                continue;
            }
            let idx = (o.cell[1] * scenario.width + o.cell[0]) as usize;
            if !seen[idx] {
                seen[idx] = true;
                queue.push_back(o.cell);
            }
        }
    }
    false
}

/// Ranges for the seeded scenario generator (inclusive).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorParams {
    pub width: (i32, i32),
    pub height: (i32, i32),
    pub ice: (usize, usize),
    pub cones: (usize, usize),
    pub parked: (usize, usize),
    /// Objects are placed within this many columns of the start column.
    pub corridor: i32,
    pub max_construable: usize,
    pub max_attempts: usize,
}

impl Default for GeneratorParams {
    fn default() -> Self {
        GeneratorParams {
            width: (5, 7),
            height: (8, 11),
            ice: (2, 4),
            cones: (2, 3),
            parked: (1, 3),
            corridor: 2,
            max_construable: 9,
            max_attempts: 1000,
        }
    }
}

impl GeneratorParams {
    pub fn validate(&self) -> Result<()> {
        let mut problems = Vec::new();
        for (name, (lo, hi)) in [("width", self.width), ("height", self.height)] {
            if lo < 3 || hi < lo || hi > 40 {
                problems.push(format!("{name} range ({lo}, {hi}) must satisfy 3 <= lo <= hi <= 40"));
            }
        }
        for (name, (lo, hi)) in [("ice", self.ice), ("cones", self.cones), ("parked", self.parked)] {
            if hi < lo {
                problems.push(format!("{name} range ({lo}, {hi}) is empty"));
            }
        }
        if self.ice.0 + self.cones.0 + self.parked.0 > self.max_construable {
            problems.push("minimum object count exceeds max_construable".into());
        }
        if self.max_construable > crate::oomdp::DEFAULT_CONSTRUAL_CAP {
            problems.push(format!(
                "max_construable {} exceeds the enumeration cap {}",
                self.max_construable,
                crate::oomdp::DEFAULT_CONSTRUAL_CAP
            ));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(problems))
        }
    }
}

fn place_cells(
    rng: &mut Rng,
    taken: &mut BTreeSet<Cell>,
    cols: (i32, i32),
    rows: (i32, i32),
    n: usize,
) -> Option<Vec<Cell>> {
    let mut cells = Vec::with_capacity(n);
    for _ in 0..n {
        let c = (0..50)
            .map(|_| [rng.random_range(cols.0..=cols.1), rng.random_range(rows.0..=rows.1)])
            .find(|c| taken.insert(*c))?;
        cells.push(c);
    }
    Some(cells)
}

fn generate_one(rng: &mut Rng, params: &GeneratorParams, id: String) -> Option<GridScenario> {
    let width = rng.random_range(params.width.0..=params.width.1);
    let height = rng.random_range(params.height.0..=params.height.1);
    let start_col = width / 2;
    let goal_col = (start_col + rng.random_range(-1..=1)).clamp(0, width - 1);
    let mut sc = GridScenario::empty(&id, width, height, [start_col, 0], [goal_col, height - 1]);
    let mut taken: BTreeSet<Cell> = [sc.ego_start, sc.goal].into_iter().collect();
    let cols = ((start_col - params.corridor).max(0), (start_col + params.corridor).min(width - 1));
    let rows = (1, height - 2);
    let n_ice = rng.random_range(params.ice.0..=params.ice.1);
    let n_cone = rng.random_range(params.cones.0..=params.cones.1);
    let n_parked = rng.random_range(params.parked.0..=params.parked.1);
    // ice patches are one or two cells tall so they cannot always be hopped
    for c in place_cells(rng, &mut taken, cols, rows, n_ice)? {
        sc.ice.push(c);
        let above = [c[0], c[1] + 1];
        if above[1] <= rows.1 && rng.random_bool(0.5) && taken.insert(above) {
            sc.ice.push(above);
        }
    }
    sc.cones = place_cells(rng, &mut taken, cols, rows, n_cone)?;
    sc.parked = place_cells(rng, &mut taken, cols, rows, n_parked)?;
    let n_objects = sc.construable_objects().len();
    (n_objects <= params.max_construable && goal_reachable(&sc)).then_some(sc)
}

/// Deterministic scenario generator; every scenario has a collision-free
/// deterministic path to its goal.
pub fn generate_scenarios(seed: u64, count: usize, params: &GeneratorParams) -> Result<Vec<GridScenario>> {
    params.validate()?;
    (0..count)
        .map(|i| {
            let mut rng = rng_for(seed, &[0x5ce7, i as u64]);
            (0..params.max_attempts)
                .find_map(|_| generate_one(&mut rng, params, format!("gen{i:03}")))
                .ok_or_else(|| Error::GenerationFailed {
                    attempts: params.max_attempts,
                    reason: format!("no reachable layout for scenario {i}"),
                })
        })
        .collect()
}

/// Hand-authored scenario mirroring the two-ice-patch layout used to
/// illustrate attention bias.
pub fn fig1_scenario() -> GridScenario {
    serde_json::from_str(include_str!("../data/fig1.json")).expect("bundled scenario parses")
}

/// Hand-authored scenario with two ice patches flanked by cones, used for the
/// IRL comparison.
pub fn fig3_scenario() -> GridScenario {
    serde_json::from_str(include_str!("../data/fig3.json")).expect("bundled scenario parses")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn chain() -> GridScenario {
        GridScenario::empty("chain", 1, 2, [0, 0], [0, 1])
    }

    fn small() -> GridScenario {
        let mut s = GridScenario::empty("small", 5, 6, [2, 0], [2, 5]);
        s.ice = vec![[2, 2], [1, 4]];
        s.cones = vec![[3, 1]];
        s.parked = vec![[1, 3], [3, 3]];
        s
    }

    fn row_sums_ok(m: &TabularMDP) -> bool {
        (0..m.n_states).all(|s| {
            (0..4).all(|a| (m.row(s, a).iter().sum::<f64>() - 1.0).abs() < 1e-12)
        })
    }

    #[test]
    fn full_construal_has_slip_on_ice() {
        let sc = small();
        let m = compile_true(&sc).unwrap();
        let s = m.state_of([2, 2]).unwrap();
        let up = Action::Up1.index();
        let succ: Vec<_> = m.successors(s, up).collect();
        // both slips end on parked cars and share the terminal state
        assert_eq!(succ.len(), 2);
        let p_slip = m.row(s, up)[m.terminal];
        assert!((p_slip - 0.4).abs() < 1e-12, "both slips hit parked cars: {p_slip}");
        assert!((m.row(s, up)[m.state_of([2, 3]).unwrap()] - 0.6).abs() < 1e-12);
        assert!(row_sums_ok(&m));
    }

    #[test]
    fn masked_ice_is_deterministic_and_masked_cone_is_free() {
        let sc = small();
        let c: Construal = ["parked0", "parked1"].into_iter().collect();
        let m = compile(&sc, &c).unwrap();
        let s = m.state_of([2, 2]).unwrap();
        assert_eq!(m.successors(s, Action::Up1.index()).count(), 1);
        let s = m.state_of([2, 0]).unwrap();
        assert_eq!(m.r(s, Action::DiagRight.index()), -2.0);
        let full = compile_true(&sc).unwrap();
        assert_eq!(full.r(s, Action::DiagRight.index()), -12.0);
    }

    #[test]
    fn masked_parked_car_is_passable() {
        let sc = small();
        let m = compile(&sc, &Construal::empty()).unwrap();
        let s = m.state_of([1, 2]).unwrap();
        assert_eq!(
            m.successors(s, Action::Up1.index()).collect::<Vec<_>>(),
            vec![(m.state_of([1, 3]).unwrap(), 1.0)]
        );
        assert_eq!(m.r(s, Action::Up1.index()), -1.0);
    }

    #[test]
    fn up2_crossing_parked_car_terminates() {
        let sc = small();
        let m = compile_true(&sc).unwrap();
        let s = m.state_of([1, 2]).unwrap();
        let a = Action::Up2.index();
        assert_eq!(m.row(s, a)[m.terminal], 1.0);
        assert_eq!(m.r(s, a), -101.0);
    }

    #[test]
    fn leaving_grid_terminates_with_action_cost_only() {
        let sc = small();
        let m = compile_true(&sc).unwrap();
        let s = m.state_of([0, 0]).unwrap();
        let a = Action::DiagLeft.index();
        assert_eq!(m.row(s, a)[m.terminal], 1.0);
        assert_eq!(m.r(s, a), -2.0);
    }

    #[test]
    fn true_step_examples() {
        let sc = small();
        let world = World::new(&sc).unwrap();
        let mut rng = rng_for(1, &[]);
        let t = world.step([0, 1], Action::Up1, &mut rng).unwrap();
        assert_eq!(t, Transition { next: [0, 2], reward: -1.0, done: false });
        let t = world.step([1, 2], Action::Up1, &mut rng).unwrap();
        assert_eq!(t, Transition { next: [1, 3], reward: -101.0, done: true });
        assert!(matches!(
            world.step([1, 3], Action::Up1, &mut rng),
            Err(Error::StepOnTerminal([1, 3]))
        ));
    }

    #[test]
    fn slip_frequency_matches_probability() {
        let mut sc = GridScenario::empty("ice", 5, 4, [2, 0], [2, 3]);
        sc.ice = vec![[2, 1]];
        let world = World::new(&sc).unwrap();
        let mut rng = rng_for(42, &[]);
        let n = 20_000;
        let slips = (0..n)
            .filter(|_| world.step([2, 1], Action::Up1, &mut rng).unwrap().next != [2, 2])
            .count();
        let p = 0.4;
        let sigma = (p * (1.0 - p) / n as f64).sqrt();
        let freq = slips as f64 / n as f64;
        assert!((freq - p).abs() < 3.0 * sigma, "slip freq {freq}");
    }

    #[test]
    fn validation_lists_violations() {
        let mut sc = small();
        sc.cones.push([2, 2]);
        sc.walls.push([9, 9]);
        match sc.validate() {
            Err(Error::Validation(v)) => assert_eq!(v.len(), 2, "{v:?}"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn empty_scenario_is_a_trivial_chain() {
        let m = compile_true(&chain()).unwrap();
        assert_eq!(m.n_states, 3);
        assert_eq!(m.r(0, Action::Up1.index()), 99.0);
        assert!(row_sums_ok(&m));
    }

    #[test]
    fn scenario_json_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.json");
        save_scenario(&path, &small()).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        let loaded = load_scenario(&path).unwrap();
        assert_eq!(loaded, small());
        save_scenario(&path, &loaded).unwrap();
        assert_eq!(std::fs::read(&path).unwrap(), bytes);
    }

    #[test]
    fn schema_error_names_path() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.json");
        std::fs::write(&path, r#"{"width": 3}"#).unwrap();
        let err = load_scenario(&path).unwrap_err();
        assert!(err.to_string().contains("bad.json"), "{err}");
    }

    #[test]
    fn generator_is_deterministic_and_reachable() {
        let params = GeneratorParams::default();
        let a = generate_scenarios(0, 25, &params).unwrap();
        let b = generate_scenarios(0, 25, &params).unwrap();
        assert_eq!(a.len(), 25);
        assert_eq!(a, b);
        for s in &a {
            s.validate().unwrap();
            assert!(goal_reachable(s));
            assert!(s.construable_objects().len() <= params.max_construable);
        }
        assert_ne!(a, generate_scenarios(1, 25, &params).unwrap());
    }

    #[test]
    fn bundled_scenarios_load() {
        for sc in [fig1_scenario(), fig3_scenario()] {
            sc.validate().unwrap();
            assert!(goal_reachable(&sc));
        }
        let f1 = fig1_scenario();
        assert_eq!(f1.ice_patches().len(), 2);
        assert!(!f1.cones.is_empty() && !f1.parked.is_empty());
    }

    proptest! {
        #[test]
        fn removing_an_object_only_changes_its_cell(seed in 0u64..200, pick in 0usize..12) {
            let sc = &generate_scenarios(seed, 1, &GeneratorParams::default()).unwrap()[0];
            let full = sc.full_construal();
            let objects = sc.construable_objects();
            let (id, _, cells) = &objects[pick % objects.len()];
            let less: Construal = full.iter().filter(|m| m != id).map(str::to_string).collect();
            let a = compile(sc, &full).unwrap();
            let b = compile(sc, &less).unwrap();
            prop_assert!(row_sums_ok(&b));
            for s in 0..a.terminal {
                let here = a.cell_of(s).unwrap();
                // rows leaving the object's own cells change, as do rows whose
                // moves (slips included) can enter them
                let affected = cells.iter().any(|cell| {
                    here == *cell
                        || ((here[1] < cell[1]) && (cell[1] - here[1] <= 2) && (cell[0] - here[0]).abs() <= 2)
                });
                if affected { continue; }
                for act in 0..4 {
                    prop_assert_eq!(a.row(s, act), b.row(s, act));
                    prop_assert_eq!(a.r(s, act), b.r(s, act));
                }
            }
        }
    }
}
