// SPDX-License-Identifier: Apache-2.0

//! Dense integer handles for entities, predicates and classes.

use std::collections::HashMap;
use std::fmt;

macro_rules! id_type {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub struct $name(pub u32);

        impl $name {
            #[inline]
            pub fn index(self) -> usize {
                self.0 as usize
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, "{}#{}", stringify!($name), self.0)
            }
        }
    };
}

id_type!(
    /// Handle of an ABox entity (literals are interned as opaque entities).
    EntityId
);
id_type!(
    /// Handle of a property name.
    PredicateId
);
id_type!(
    /// Handle of a class name.
    ClassId
);

/// The universal top class, always interned first.
pub const THING: ClassId = ClassId(0);
pub const THING_NAME: &str = "Thing";

/// Append-only string table.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Interner {
    names: Vec<String>,
    index: HashMap<String, u32>,
}

impl Interner {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn intern(&mut self, name: &str) -> u32 {
        if let Some(&id) = self.index.get(name) {
            return id;
        }
        let id = self.names.len() as u32;
        self.names.push(name.to_owned());
        self.index.insert(name.to_owned(), id);
        id
    }

    pub fn get(&self, name: &str) -> Option<u32> {
        self.index.get(name).copied()
    }

    pub fn name(&self, id: u32) -> &str {
        &self.names[id as usize]
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.names.iter().map(String::as_str)
    }
}

/// The three string tables shared by the ABox and the TBox.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    pub entities: Interner,
    pub predicates: Interner,
    pub classes: Interner,
    /// The spelling of `rdf:type` seen on input, kept for export.
    pub type_label: Option<String>,
}

impl Default for Vocabulary {
    fn default() -> Self {
        Self::new()
    }
}

impl Vocabulary {
    pub fn new() -> Self {
        let mut classes = Interner::new();
        classes.intern(THING_NAME);
        Vocabulary {
            entities: Interner::new(),
            predicates: Interner::new(),
            classes,
            type_label: None,
        }
    }

    pub fn entity(&mut self, name: &str) -> EntityId {
        EntityId(self.entities.intern(name))
    }

    pub fn predicate(&mut self, name: &str) -> PredicateId {
        PredicateId(self.predicates.intern(name))
    }

    pub fn class(&mut self, name: &str) -> ClassId {
        ClassId(self.classes.intern(name))
    }

    pub fn entity_id(&self, name: &str) -> Option<EntityId> {
        self.entities.get(name).map(EntityId)
    }

    pub fn predicate_id(&self, name: &str) -> Option<PredicateId> {
        self.predicates.get(name).map(PredicateId)
    }

    pub fn class_id(&self, name: &str) -> Option<ClassId> {
        self.classes.get(name).map(ClassId)
    }

    pub fn entity_name(&self, id: EntityId) -> &str {
        self.entities.name(id.0)
    }

    pub fn predicate_name(&self, id: PredicateId) -> &str {
        self.predicates.name(id.0)
    }

    pub fn class_name(&self, id: ClassId) -> &str {
        self.classes.name(id.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn thing_is_class_zero() {
        let v = Vocabulary::new();
        assert_eq!(v.class_id("Thing"), Some(THING));
        assert_eq!(v.class_name(THING), "Thing");
    }

    proptest! {
        #[test]
        fn interning_round_trips(names in proptest::collection::vec("[a-z]{1,6}", 0..40)) {
            let mut table = Interner::new();
            let ids: Vec<u32> = names.iter().map(|n| table.intern(n)).collect();
            for (name, id) in names.iter().zip(&ids) {
                prop_assert_eq!(table.name(*id), name.as_str());
                prop_assert_eq!(table.get(table.name(*id)), Some(*id));
            }
            let distinct: std::collections::HashSet<_> = names.iter().collect();
            prop_assert_eq!(table.len(), distinct.len());
        }
    }
}
