//! Closed vocabularies shared across the pipeline.


macro_rules! named_enum {
    ($(#[$meta:meta])* $name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, ::serde::Serialize, ::serde::Deserialize)]
        pub enum $name {
            $(#[serde(rename = $text)] $variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn as_str(&self) -> &'static str {
                match self {
                    $($name::$variant => $text),+
                }
            }
        }

        impl ::std::fmt::Display for $name {
            fn fmt(&self, f: &mut ::std::fmt::Formatter<'_>) -> ::std::fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl ::std::str::FromStr for $name {
            type Err = $crate::labels::UnknownLabel;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $($text => Ok($name::$variant),)+
                    _ => Err($crate::labels::UnknownLabel { kind: stringify!($name), value: s.to_string() }),
                }
            }
        }
    };
}

pub(crate) use named_enum;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown {kind} value {value:?}")]
pub struct UnknownLabel {
    pub kind: &'static str,
    pub value: String,
}

named_enum!(
    /// Imaging modality of the index study.
    Modality {
        Ct => "CT",
        Mri => "MRI",
        NuclearMedicine => "NuclearMedicine",
        Pet => "PET",
        Ultrasound => "Ultrasound",
    }
);

named_enum!(
    /// Body region imaged.
    BodyGroup {
        Head => "Head",
        Neck => "Neck",
        Chest => "Chest",
        Mixed => "Mixed",
    }
);

named_enum!(
    /// Report-level outcome of the two-stage pipeline.
    ReportLabel {
        NoFinding => "NoFinding",
        NonNodular => "NonNodular",
        Itn => "ITN",
    }
);

impl ReportLabel {
    /// Any incidental thyroid finding, nodular or not.
    pub fn is_itf(&self) -> bool {
        !matches!(self, ReportLabel::NoFinding)
    }
}

named_enum!(
    /// Annotation categories of the entity dictionary.
    EntityCategory {
        Thyroid => "Thyroid",
        NormalFinding => "NormalFinding",
        TypeOfFinding => "TypeOfFinding",
        NumberOfFindings => "NumberOfFindings",
        Size => "Size",
        Location => "Location",
        RadiologicalCharacteristic => "RadiologicalCharacteristic",
        AssociatedFinding => "AssociatedFinding",
        RadiologyClassification => "RadiologyClassification",
        Recommendation => "Recommendation",
    }
);

named_enum!(
    Sex {
        Female => "Female",
        Male => "Male",
    }
);

/// Subtype label used on `TypeOfFinding` spans for nodular findings.
pub const SUBTYPE_NODULAR: &str = "Nodular";
/// Subtype label used on `TypeOfFinding` spans for diffuse findings.
pub const SUBTYPE_NON_NODULAR: &str = "NonNodular";

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trips_through_str() {
        for m in Modality::ALL {
            assert_eq!(m.as_str().parse::<Modality>().unwrap(), *m);
        }
        for c in EntityCategory::ALL {
            assert_eq!(c.as_str().parse::<EntityCategory>().unwrap(), *c);
        }
        assert_eq!(EntityCategory::ALL.len(), 10);
        assert!("Spleen".parse::<BodyGroup>().is_err());
    }

    #[test]
    fn serde_names_match_display() {
        let s = serde_json::to_string(&ReportLabel::Itn).unwrap();
        assert_eq!(s, "\"ITN\"");
        let m: Modality = serde_json::from_str("\"NuclearMedicine\"").unwrap();
        assert_eq!(m, Modality::NuclearMedicine);
    }
}
