use std::fmt;

use serde::{Deserialize, Serialize};

macro_rules! id_type {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(String);

        impl $name {
            pub fn new(id: impl Into<String>) -> Self {
                Self(id.into())
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl From<&str> for $name {
            fn from(s: &str) -> Self {
                Self(s.to_owned())
            }
        }

        impl From<String> for $name {
            fn from(s: String) -> Self {
                Self(s)
            }
        }

        impl AsRef<str> for $name {
            fn as_ref(&self) -> &str {
                &self.0
            }
        }
    };
}

id_type!(
    /// Random 128-bit identifier, hex encoded.
    LibraryId
);
id_type!(
    /// Derived from the owning library and the source bytes, so re-uploading
    /// the same file into a library resolves to the same paper.
    PaperId
);
id_type!(
    /// Content-addressed: changes whenever the paragraph text changes.
    ParagraphId
);
id_type!(RetrievalId);
id_type!(ModelId);

pub(crate) fn random_hex_id() -> String {
    uuid::Uuid::new_v4().simple().to_string()
}
