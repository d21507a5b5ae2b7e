use std::fmt;

use serde::{Deserialize, Serialize};

macro_rules! id_type {
    ($(#[$meta:meta])* $name:ident($inner:ty)) => {
        $(#[$meta])*
        #[derive(
            Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize,
        )]
        pub struct $name(pub $inner);

        impl $name {
            #[inline]
            pub fn index(self) -> usize {
                self.0 as usize
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                self.0.fmt(f)
            }
        }

        impl From<usize> for $name {
            #[inline]
            fn from(v: usize) -> Self {
                $name(v as $inner)
            }
        }
    };
}

id_type!(
    /// Object identifier. OIDs are dense: `0..no` for a freshly generated database.
    Oid(u32)
);
id_type!(
    /// Class identifier, `0..nc`.
    ClassId(u32)
);
id_type!(
    /// Page identifier inside a [`crate::sim::PageMap`].
    PageId(u32)
);
id_type!(
    /// Reference type (`TRef`). Types 0 and 1 are inheritance and composition.
    RefType(u8)
);

impl RefType {
    pub const INHERITANCE: RefType = RefType(0);
    pub const COMPOSITION: RefType = RefType(1);
}
