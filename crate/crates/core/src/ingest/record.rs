use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Error for a label that is not in a closed enumeration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownLabel {
    pub kind: &'static str,
    pub label: String,
}

impl fmt::Display for UnknownLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "`{}` is not a valid {} label", self.label, self.kind)
    }
}

impl std::error::Error for UnknownLabel {}

macro_rules! label_enum {
    ($(#[$meta:meta])* $name:ident, $kind:literal { $($variant:ident),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn label(self) -> &'static str {
                match self {
                    $($name::$variant => stringify!($variant)),+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.label())
            }
        }

        impl FromStr for $name {
            type Err = UnknownLabel;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                $name::ALL
                    .iter()
                    .copied()
                    .find(|v| v.label().eq_ignore_ascii_case(s))
                    .ok_or_else(|| UnknownLabel { kind: $kind, label: s.to_string() })
            }
        }
    };
}

pub(crate) use label_enum;

label_enum!(Sector, "sector" { Rural, Urban });
label_enum!(Gender, "gender" { Male, Female });
label_enum!(SocialGroup, "social group" { ST, SC, OBC, Others });
label_enum!(
    /// Working age bands; boundaries come from the layout's `age_bands`.
    AgeGroup, "age group" { G1, G2, G3, G4 }
);
label_enum!(Ownership, "enterprise ownership" {
    ProprietaryOrPartnership,
    IncorporatedOrOtherLegal,
    Household,
    Unknown,
});
label_enum!(SizeClass, "enterprise size" { LessThanTen, TenOrMore, Unknown });
label_enum!(JobStatus, "job status" { RegularWage, Casual, SelfEmployed, Unknown });
label_enum!(SocialSecurity, "social security" { Available, NotAvailable, Unknown });

impl AgeGroup {
    /// Places `age` in bands `[b0,b1) [b1,b2) [b2,b3) [b3,inf)`; `None` below `b0`.
    pub fn from_age(age: u32, bands: &[u32; 4]) -> Option<AgeGroup> {
        if age < bands[0] {
            None
        } else if age < bands[1] {
            Some(AgeGroup::G1)
        } else if age < bands[2] {
            Some(AgeGroup::G2)
        } else if age < bands[3] {
            Some(AgeGroup::G3)
        } else {
            Some(AgeGroup::G4)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EnterpriseProfile {
    pub ownership: Ownership,
    pub size_class: SizeClass,
}

impl Default for EnterpriseProfile {
    fn default() -> Self {
        Self {
            ownership: Ownership::Unknown,
            size_class: SizeClass::Unknown,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct JobProfile {
    pub status: JobStatus,
    pub social_security: SocialSecurity,
}

impl Default for JobProfile {
    fn default() -> Self {
        Self {
            status: JobStatus::Unknown,
            social_security: SocialSecurity::Unknown,
        }
    }
}

/// One surveyed worker.
///
/// `mpce` is `None` only when the layout marks the role absent; a bound mpce
/// field that is blank or non-positive rejects the record at ingest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationRecord {
    pub record_id: String,
    pub weight: f64,
    pub mpce: Option<f64>,
    pub occupation: Option<String>,
    pub industry: Option<String>,
    pub sector: Option<Sector>,
    pub gender: Option<Gender>,
    pub social_group: Option<SocialGroup>,
    pub age: Option<u32>,
    pub age_group: Option<AgeGroup>,
    pub region: Option<String>,
    pub enterprise: EnterpriseProfile,
    pub job: JobProfile,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labels_parse_case_insensitively() {
        assert_eq!("rural".parse::<Sector>().unwrap(), Sector::Rural);
        assert_eq!("obc".parse::<SocialGroup>().unwrap(), SocialGroup::OBC);
        assert_eq!(
            "NotAvailable".parse::<SocialSecurity>().unwrap(),
            SocialSecurity::NotAvailable
        );
        let err = "Urbanish".parse::<Sector>().unwrap_err();
        assert_eq!(err.kind, "sector");
    }

    #[test]
    fn age_bands() {
        let bands = [15, 25, 45, 65];
        assert_eq!(AgeGroup::from_age(14, &bands), None);
        assert_eq!(AgeGroup::from_age(15, &bands), Some(AgeGroup::G1));
        assert_eq!(AgeGroup::from_age(24, &bands), Some(AgeGroup::G1));
        assert_eq!(AgeGroup::from_age(25, &bands), Some(AgeGroup::G2));
        assert_eq!(AgeGroup::from_age(64, &bands), Some(AgeGroup::G3));
        assert_eq!(AgeGroup::from_age(65, &bands), Some(AgeGroup::G4));
        assert_eq!(AgeGroup::from_age(99, &bands), Some(AgeGroup::G4));
    }
}
