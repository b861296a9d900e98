//! Object-oriented states and construal masking.
//!
//! A state is a map from `(object id, feature)` to a value. A construal is a
//! subset of the construable objects; masking a state by a construal keeps
//! every non-construable object (ego, goal, walls, road geometry) plus the
//! construed objects and drops everything else.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type ObjectId = String;

/// Default upper bound on the number of construable objects for full
/// powerset enumeration.
pub const DEFAULT_CONSTRUAL_CAP: usize = 12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FeatureValue {
    Scalar(f64),
    Vector(Vec<f64>),
}

impl FeatureValue {
    pub fn as_scalar(&self) -> Option<f64> {
        match self {
            FeatureValue::Scalar(v) => Some(*v),
            FeatureValue::Vector(_) => None,
        }
    }

    pub fn as_vector(&self) -> Option<&[f64]> {
        match self {
            FeatureValue::Vector(v) => Some(v),
            FeatureValue::Scalar(_) => None,
        }
    }
}

impl From<f64> for FeatureValue {
    fn from(v: f64) -> Self {
        FeatureValue::Scalar(v)
    }
}

impl From<Vec<f64>> for FeatureValue {
    fn from(v: Vec<f64>) -> Self {
        FeatureValue::Vector(v)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Object {
    pub class: String,
    pub features: BTreeMap<String, FeatureValue>,
}

impl Object {
    pub fn new(class: impl Into<String>) -> Self {
        Object {
            class: class.into(),
            features: BTreeMap::new(),
        }
    }

    pub fn with(mut self, feature: &str, value: impl Into<FeatureValue>) -> Self {
        self.features.insert(feature.to_string(), value.into());
        self
    }

    pub fn vector(&self, feature: &str) -> Option<&[f64]> {
        self.features.get(feature).and_then(FeatureValue::as_vector)
    }

    pub fn scalar(&self, feature: &str) -> Option<f64> {
        self.features.get(feature).and_then(FeatureValue::as_scalar)
    }
}

/// Features every object of a class must carry.
pub fn required_features(class: &str) -> Option<&'static [&'static str]> {
    Some(match class {
        "ego" | "goal" | "ice" | "cone" | "parked" | "wall" => &["pos"],
        "vehicle" => &["pos", "heading", "speed"],
        "road" => &["points"],
        _ => return None,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectState {
    objects: BTreeMap<ObjectId, Object>,
    construable: BTreeSet<ObjectId>,
}

impl ObjectState {
    pub fn new(
        objects: BTreeMap<ObjectId, Object>,
        construable: BTreeSet<ObjectId>,
    ) -> Result<Self> {
        let state = ObjectState {
            objects,
            construable,
        };
        state.validate()?;
        Ok(state)
    }

    fn validate(&self) -> Result<()> {
        for (id, obj) in &self.objects {
            let required = required_features(&obj.class).ok_or_else(|| {
                Error::InvalidState(format!("object {id:?} has unknown class {:?}", obj.class))
            })?;
            for f in required {
                if !obj.features.contains_key(*f) {
                    return Err(Error::InvalidState(format!(
                        "object {id:?} of class {:?} is missing feature {f:?}",
                        obj.class
                    )));
                }
            }
        }
        if let Some(id) = self.construable.iter().find(|id| !self.objects.contains_key(*id)) {
            return Err(Error::InvalidState(format!(
                "construable id {id:?} has no object"
            )));
        }
        Ok(())
    }

    pub fn objects(&self) -> &BTreeMap<ObjectId, Object> {
        &self.objects
    }

    pub fn object(&self, id: &str) -> Option<&Object> {
        self.objects.get(id)
    }

    pub fn construable(&self) -> &BTreeSet<ObjectId> {
        &self.construable
    }

    pub fn is_construable(&self, id: &str) -> bool {
        self.construable.contains(id)
    }

    /// Flattened `(object id, feature) -> value` view.
    pub fn entries(&self) -> impl Iterator<Item = ((&str, &str), &FeatureValue)> {
        self.objects.iter().flat_map(|(id, obj)| {
            obj.features
                .iter()
                .map(move |(f, v)| ((id.as_str(), f.as_str()), v))
        })
    }

    /// Ids of objects of the given class, in sorted order.
    pub fn ids_of_class<'a>(&'a self, class: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.objects
            .iter()
            .filter(move |(_, o)| o.class == class)
            .map(|(id, _)| id.as_str())
    }
}

/// A subset of construable object ids.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Construal {
    members: BTreeSet<ObjectId>,
}

impl Construal {
    pub fn empty() -> Self {
        Construal::default()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, id: &str) -> bool {
        self.members.contains(id)
    }

    pub fn members(&self) -> &BTreeSet<ObjectId> {
        &self.members
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.members.iter().map(String::as_str)
    }

    pub fn is_subset(&self, other: &Construal) -> bool {
        self.members.is_subset(&other.members)
    }
}

impl<S: Into<ObjectId>> FromIterator<S> for Construal {
    fn from_iter<I: IntoIterator<Item = S>>(iter: I) -> Self {
        Construal {
            members: iter.into_iter().map(Into::into).collect(),
        }
    }
}

impl std::fmt::Display for Construal {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{{")?;
        for (i, id) in self.members.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{id}")?;
        }
        write!(f, "}}")
    }
}

fn check_construal(s: &ObjectState, c: &Construal) -> Result<()> {
    for id in c.iter() {
        if !s.objects.contains_key(id) {
            return Err(Error::InvalidConstrual(format!("object {id:?} is not in the state")));
        }
        if !s.construable.contains(id) {
            return Err(Error::InvalidConstrual(format!("object {id:?} is not construable")));
        }
    }
    Ok(())
}

/// The construed state `s[C]`.
pub fn mask(s: &ObjectState, c: &Construal) -> Result<ObjectState> {
    check_construal(s, c)?;
    let objects = s
        .objects
        .iter()
        .filter(|(id, _)| !s.construable.contains(*id) || c.contains(id))
        .map(|(id, o)| (id.clone(), o.clone()))
        .collect();
    Ok(ObjectState {
        objects,
        construable: c.members.clone(),
    })
}

/// All `2^k` subsets of the construable ids, capped at
/// [`DEFAULT_CONSTRUAL_CAP`] objects.
pub fn enumerate_construals(s: &ObjectState) -> Result<Vec<Construal>> {
    enumerate_construals_capped(s, DEFAULT_CONSTRUAL_CAP)
}

/// Subsets are ordered by their bitmask over the sorted ids, where the first
/// id is the lowest bit: `[{}, {a}, {b}, {a,b}, ...]`.
pub fn enumerate_construals_capped(s: &ObjectState, cap: usize) -> Result<Vec<Construal>> {
    let ids: Vec<&ObjectId> = s.construable.iter().collect();
    let k = ids.len();
    if k > cap || k >= usize::BITS as usize {
        return Err(Error::EnumerationTooLarge { count: k, cap });
    }
    Ok((0..1usize << k)
        .map(|bits| {
            ids.iter()
                .enumerate()
                .filter(|(i, _)| bits >> i & 1 == 1)
                .map(|(_, id)| (*id).clone())
                .collect()
        })
        .collect())
}

pub fn single_object_construals(s: &ObjectState) -> Vec<Construal> {
    s.construable
        .iter()
        .map(|id| std::iter::once(id.clone()).collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pos(x: f64, y: f64) -> FeatureValue {
        FeatureValue::Vector(vec![x, y])
    }

    fn scene(n_construable: usize) -> ObjectState {
        let mut objects = BTreeMap::new();
        objects.insert("ego".to_string(), Object::new("ego").with("pos", pos(0.0, 0.0)));
        objects.insert("goal".to_string(), Object::new("goal").with("pos", pos(0.0, 5.0)));
        let mut construable = BTreeSet::new();
        for i in 0..n_construable {
            let id = format!("obj{i:02}");
            objects.insert(id.clone(), Object::new("ice").with("pos", pos(i as f64, 1.0)));
            construable.insert(id);
        }
        ObjectState::new(objects, construable).unwrap()
    }

    fn fig_state() -> ObjectState {
        let mut objects = BTreeMap::new();
        objects.insert("ego".to_string(), Object::new("ego").with("pos", pos(0.0, 0.0)));
        objects.insert("goal".to_string(), Object::new("goal").with("pos", pos(0.0, 5.0)));
        objects.insert("ice1".to_string(), Object::new("ice").with("pos", pos(1.0, 1.0)));
        objects.insert("cone1".to_string(), Object::new("cone").with("pos", pos(2.0, 1.0)));
        let construable = ["ice1", "cone1"].iter().map(|s| s.to_string()).collect();
        ObjectState::new(objects, construable).unwrap()
    }

    #[test]
    fn mask_keeps_non_construable_and_members() {
        let s = fig_state();
        let c: Construal = ["ice1"].into_iter().collect();
        let m = mask(&s, &c).unwrap();
        let ids: Vec<_> = m.objects().keys().cloned().collect();
        assert_eq!(ids, vec!["ego", "goal", "ice1"]);
        // input untouched
        assert_eq!(s.objects().len(), 4);
    }

    #[test]
    fn mask_full_is_identity_and_empty_keeps_fixed() {
        let s = fig_state();
        let full: Construal = s.construable().iter().cloned().collect();
        assert_eq!(mask(&s, &full).unwrap(), s);
        let m = mask(&s, &Construal::empty()).unwrap();
        let ids: Vec<_> = m.objects().keys().cloned().collect();
        assert_eq!(ids, vec!["ego", "goal"]);
    }

    #[test]
    fn mask_rejects_unknown_or_fixed_ids() {
        let s = fig_state();
        let c: Construal = ["tree"].into_iter().collect();
        assert!(matches!(mask(&s, &c), Err(Error::InvalidConstrual(_))));
        let c: Construal = ["ego"].into_iter().collect();
        assert!(matches!(mask(&s, &c), Err(Error::InvalidConstrual(_))));
    }

    #[test]
    fn state_rejects_incomplete_objects() {
        let mut objects = BTreeMap::new();
        objects.insert("v".to_string(), Object::new("vehicle").with("pos", pos(0.0, 0.0)));
        assert!(matches!(
            ObjectState::new(objects, BTreeSet::new()),
            Err(Error::InvalidState(_))
        ));
    }

    #[test]
    fn enumeration_sizes_and_order() {
        let two = enumerate_construals(&scene(2)).unwrap();
        let expect: Vec<Construal> = vec![
            Construal::empty(),
            ["obj00"].into_iter().collect(),
            ["obj01"].into_iter().collect(),
            ["obj00", "obj01"].into_iter().collect(),
        ];
        assert_eq!(two, expect);
        assert_eq!(enumerate_construals(&scene(0)).unwrap(), vec![Construal::empty()]);
        assert_eq!(enumerate_construals(&scene(12)).unwrap().len(), 4096);
        match enumerate_construals(&scene(13)) {
            Err(Error::EnumerationTooLarge { count: 13, cap: 12 }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn singletons() {
        assert_eq!(single_object_construals(&scene(15)).len(), 15);
        let one = single_object_construals(&scene(1));
        assert_eq!(one.len(), 1);
        assert_eq!(one[0].len(), 1);
        assert!(single_object_construals(&scene(0)).is_empty());
    }

    #[test]
    fn state_json_shape() {
        let s = fig_state();
        let v = serde_json::to_value(&s).unwrap();
        assert_eq!(v["objects"]["ice1"]["class"], "ice");
        assert_eq!(v["construable"], serde_json::json!(["cone1", "ice1"]));
        let c: Construal = ["b", "a"].into_iter().collect();
        assert_eq!(serde_json::to_string(&c).unwrap(), r#"["a","b"]"#);
        let back: ObjectState = serde_json::from_value(v).unwrap();
        assert_eq!(back, s);
    }

    proptest! {
        #[test]
        fn mask_idempotent_and_monotone(k in 0usize..7, a in 0u32..128, b in 0u32..128) {
            let s = scene(k);
            let all = enumerate_construals(&s).unwrap();
            let c = &all[(a as usize) % all.len()];
            let bigger: Construal = c.iter().chain(all[(b as usize) % all.len()].iter())
                .map(str::to_string).collect();
            let m = mask(&s, c).unwrap();
            prop_assert_eq!(mask(&m, c).unwrap(), m.clone());
            let mb = mask(&s, &bigger).unwrap();
            for ((id, f), v) in m.entries() {
                prop_assert_eq!(mb.object(id).unwrap().features.get(f), Some(v));
            }
        }

        #[test]
        fn enumeration_has_no_duplicates(k in 0usize..10) {
            let all = enumerate_construals(&scene(k)).unwrap();
            let set: BTreeSet<_> = all.iter().cloned().collect();
            prop_assert_eq!(all.len(), 1 << k);
            prop_assert_eq!(set.len(), 1 << k);
        }
    }
}
