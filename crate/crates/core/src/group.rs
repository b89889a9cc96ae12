use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::fmt;
use std::sync::Arc;

/// Name of a source or evaluation group.
///
/// Cheap to clone; ordering and equality are by name. Whether a group acts as
/// a source or an evaluation group is determined by where it is used, and the
/// same name may serve as both.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GroupId(Arc<str>);

impl GroupId {
    /// Panics on an empty name; use [`GroupId::try_new`] for untrusted input.
    pub fn new(name: &str) -> Self {
        Self::try_new(name).expect("group name must be non-empty")
    }

    pub fn try_new(name: &str) -> Option<Self> {
        if name.is_empty() {
            None
        } else {
            Some(GroupId(Arc::from(name)))
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for GroupId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", &*self.0)
    }
}

impl fmt::Display for GroupId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for GroupId {
    fn from(s: &str) -> Self {
        GroupId::new(s)
    }
}

impl std::borrow::Borrow<str> for GroupId {
    fn borrow(&self) -> &str {
        &self.0
    }
}

impl Serialize for GroupId {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.0)
    }
}

impl<'de> Deserialize<'de> for GroupId {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        GroupId::try_new(&s).ok_or_else(|| serde::de::Error::custom("empty group name"))
    }
}
