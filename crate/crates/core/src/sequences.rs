// SPDX-License-Identifier: Apache-2.0

//! Composite sequences: the catalog of universal broadband phase lists and
//! their execution against a constituent pulse.

use std::f64::consts::PI;
use std::fmt;

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::su2::{apply_phase, compose, Propagator};

/// Anagram symmetry tolerance.
pub const SYMMETRY_TOL: f64 = 1e-12;

/// A phase written as a multiple of π: either an exact rational or a decimal
/// as printed in the catalog.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PhaseOverPi {
    Rational { num: i64, den: i64 },
    Decimal(f64),
}

impl PhaseOverPi {
    pub fn value(&self) -> f64 {
        match *self {
            PhaseOverPi::Rational { num, den } => num as f64 / den as f64,
            PhaseOverPi::Decimal(x) => x,
        }
    }

    pub fn radians(&self) -> f64 {
        match *self {
            PhaseOverPi::Rational { num, den } => num as f64 * PI / den as f64,
            PhaseOverPi::Decimal(x) => x * PI,
        }
    }
}

impl fmt::Display for PhaseOverPi {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            PhaseOverPi::Rational { num: 0, .. } | PhaseOverPi::Rational { den: 1, .. } => {
                write!(f, "{}", self.value())
            }
            PhaseOverPi::Rational { num, den } => write!(f, "{num}/{den}"),
            PhaseOverPi::Decimal(x) => write!(f, "{x}"),
        }
    }
}

impl Serialize for PhaseOverPi {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            PhaseOverPi::Rational { .. } => serializer.serialize_str(&self.to_string()),
            PhaseOverPi::Decimal(x) => serializer.serialize_f64(*x),
        }
    }
}

/// Which error the catalog variant favours. Metadata only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Better against pulse-duration (area) errors.
    A,
    /// Better against detuning errors.
    B,
}

/// An ordered list of pulse phases with its claimed nullification order.
#[derive(Debug, Clone, PartialEq)]
pub struct CompositeSequence {
    pub label: String,
    pub phases: Vec<f64>,
    /// Highest order `j` for which all `c_nj` vanish; `Q = O(q^(2·jmax+2))`.
    pub jmax: usize,
    pub variant: Option<Variant>,
    /// Exact printed form, when known.
    pub phases_over_pi: Option<Vec<PhaseOverPi>>,
}

impl CompositeSequence {
    pub fn new(label: impl Into<String>, phases: Vec<f64>, jmax: usize) -> Result<Self> {
        if phases.is_empty() {
            return Err(Error::Domain("a composite sequence needs at least one pulse".into()));
        }
        if let Some(bad) = phases.iter().find(|x| !x.is_finite()) {
            return Err(Error::Domain(format!("non-finite phase {bad}")));
        }
        Ok(CompositeSequence {
            label: label.into(),
            phases,
            jmax,
            variant: None,
            phases_over_pi: None,
        })
    }

    /// A plain single pulse (phase 0).
    pub fn single() -> Self {
        CompositeSequence {
            label: "single".into(),
            phases: vec![0.0],
            jmax: 0,
            variant: None,
            phases_over_pi: Some(vec![PhaseOverPi::Rational { num: 0, den: 1 }]),
        }
    }

    pub fn len(&self) -> usize {
        self.phases.len()
    }

    pub fn is_empty(&self) -> bool {
        self.phases.is_empty()
    }

    /// Phases divided by π, exact where the printed form is known.
    pub fn export_phases(&self) -> Vec<PhaseOverPi> {
        match &self.phases_over_pi {
            Some(exact) => exact.clone(),
            None => self.phases.iter().map(|p| PhaseOverPi::Decimal(p / PI)).collect(),
        }
    }

    pub fn to_record(&self) -> SequenceRecord {
        SequenceRecord {
            label: self.label.clone(),
            n: self.len(),
            jmax: self.jmax,
            variant: self.variant,
            phases_over_pi: self.export_phases(),
        }
    }
}

impl Serialize for CompositeSequence {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_record().serialize(s)
    }
}

/// JSON form of a catalog entry.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SequenceRecord {
    pub label: String,
    pub n: usize,
    pub jmax: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub variant: Option<Variant>,
    pub phases_over_pi: Vec<PhaseOverPi>,
}

enum Printed {
    Rational(&'static [i64], i64),
    Decimal(&'static [f64]),
}

struct Entry {
    label: &'static str,
    jmax: usize,
    printed: Printed,
}

use Printed::{Decimal, Rational};

const CATALOG: &[Entry] = &[
    Entry { label: "U3", jmax: 0, printed: Rational(&[0, 1, 0], 2) },
    Entry { label: "U5a", jmax: 2, printed: Rational(&[0, 5, 2, 5, 0], 6) },
    Entry { label: "U5b", jmax: 2, printed: Rational(&[0, 11, 2, 11, 0], 6) },
    Entry { label: "U7a", jmax: 2, printed: Rational(&[0, 11, 10, 17, 10, 11, 0], 12) },
    Entry { label: "U7b", jmax: 2, printed: Rational(&[0, 23, 10, 5, 10, 23, 0], 12) },
    Entry {
        label: "U9a",
        jmax: 2,
        printed: Decimal(&[0.0, 0.635, 1.35, 0.553, 0.297, 0.553, 1.35, 0.635, 0.0]),
    },
    Entry {
        label: "U9b",
        jmax: 2,
        printed: Decimal(&[0.0, 1.635, 1.35, 1.553, 0.297, 1.553, 1.35, 1.635, 0.0]),
    },
    Entry {
        label: "U11a",
        jmax: 2,
        printed: Decimal(&[0.0, 0.574, 0.085, 0.378, 0.553, 1.105, 0.553, 0.378, 0.085, 0.574, 0.0]),
    },
    Entry {
        label: "U11b",
        jmax: 2,
        printed: Decimal(&[0.0, 1.574, 0.085, 1.378, 0.553, 0.105, 0.553, 1.378, 0.085, 1.574, 0.0]),
    },
    Entry {
        label: "U13a",
        jmax: 4,
        printed: Rational(&[0, 9, 42, 11, 8, 37, 2, 37, 8, 11, 42, 9, 0], 24),
    },
    Entry {
        label: "U13b",
        jmax: 4,
        printed: Rational(&[0, 33, 42, 35, 8, 13, 2, 13, 8, 35, 42, 33, 0], 24),
    },
    Entry {
        label: "U25a",
        jmax: 8,
        printed: Rational(
            &[0, 5, 2, 5, 0, 11, 4, 1, 4, 11, 2, 7, 4, 7, 2, 11, 4, 1, 4, 11, 0, 5, 2, 5, 0],
            6,
        ),
    },
    Entry {
        label: "U25b",
        jmax: 8,
        printed: Rational(
            &[0, 11, 2, 11, 0, 5, 4, 7, 4, 5, 2, 1, 4, 1, 2, 5, 4, 7, 4, 5, 0, 11, 2, 11, 0],
            6,
        ),
    },
];

/// Labels of every catalog entry, in table order.
pub fn catalog_labels() -> Vec<&'static str> {
    CATALOG.iter().map(|e| e.label).collect()
}

/// Looks up a catalog entry by label (case-sensitive, e.g. `"U5a"`).
pub fn catalog(label: &str) -> Result<CompositeSequence> {
    let entry = CATALOG
        .iter()
        .find(|e| e.label == label)
        .ok_or_else(|| Error::UnknownLabel {
            label: label.to_string(),
            valid: catalog_labels().iter().map(|s| s.to_string()).collect(),
        })?;
    let printed: Vec<PhaseOverPi> = match entry.printed {
        Rational(nums, den) => nums.iter().map(|&num| PhaseOverPi::Rational { num, den }).collect(),
        Decimal(vals) => vals.iter().map(|&x| PhaseOverPi::Decimal(x)).collect(),
    };
    let variant = match entry.label.chars().last() {
        Some('a') => Some(Variant::A),
        Some('b') => Some(Variant::B),
        _ => None,
    };
    Ok(CompositeSequence {
        label: entry.label.to_string(),
        phases: printed.iter().map(PhaseOverPi::radians).collect(),
        jmax: entry.jmax,
        variant,
        phases_over_pi: Some(printed),
    })
}

/// Every catalog entry, in table order.
pub fn full_catalog() -> Vec<CompositeSequence> {
    CATALOG
        .iter()
        .map(|e| catalog(e.label).expect("static catalog"))
        .collect()
}

/// Composite propagator `U(φ_n)···U(φ_1)` of identical pulses; pulse 1 acts first.
pub fn execute(seq: &CompositeSequence, base: &Propagator) -> Result<Propagator> {
    let pulses: Vec<Propagator> = seq.phases.iter().map(|&phi| apply_phase(base, phi)).collect();
    compose(&pulses)
}

/// Like [`execute`], with an additional per-pulse phase error.
pub fn execute_with_offsets(seq: &CompositeSequence, base: &Propagator, offsets: &[f64]) -> Result<Propagator> {
    if offsets.len() != seq.len() {
        return Err(Error::Domain(format!(
            "{} phase offsets supplied for {} pulses",
            offsets.len(),
            seq.len()
        )));
    }
    let pulses: Vec<Propagator> = seq
        .phases
        .iter()
        .zip(offsets)
        .map(|(&phi, &eps)| apply_phase(base, phi + eps))
        .collect();
    compose(&pulses)
}

/// Anagram symmetry: `φ_{n+1-k} = φ_k` for every `k`.
pub fn validate_symmetry(seq: &CompositeSequence) -> bool {
    is_anagram(&seq.phases)
}

pub fn is_anagram(phases: &[f64]) -> bool {
    phases
        .iter()
        .zip(phases.iter().rev())
        .all(|(a, b)| (a - b).abs() <= SYMMETRY_TOL)
}

/// The catalog as JSON records.
pub fn catalog_records() -> Vec<SequenceRecord> {
    full_catalog().iter().map(CompositeSequence::to_record).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pulses::analytic_rabi;
    use crate::su2::{infidelity, make_propagator, Mat2};
    use proptest::prelude::*;

    fn brute_force(phases: &[f64], base: &Propagator) -> Mat2 {
        let mut m = Mat2::identity();
        for &phi in phases {
            m = apply_phase(base, phi).matrix() * m;
        }
        m
    }

    #[test]
    fn catalog_examples() {
        let u3 = catalog("U3").unwrap();
        assert_eq!(u3.phases, vec![0.0, PI / 2.0, 0.0]);
        assert_eq!(u3.jmax, 0);
        let u5a = catalog("U5a").unwrap();
        let expect: Vec<f64> = [0.0, 5.0, 2.0, 5.0, 0.0].iter().map(|k| k * PI / 6.0).collect();
        assert_eq!(u5a.phases, expect);
        let u13b = catalog("U13b").unwrap();
        let expect: Vec<f64> = [0, 33, 42, 35, 8, 13, 2, 13, 8, 35, 42, 33, 0]
            .iter()
            .map(|&k| k as f64 * PI / 24.0)
            .collect();
        assert_eq!(u13b.phases, expect);
        assert_eq!(u13b.jmax, 4);
        assert_eq!(catalog("U25a").unwrap().jmax, 8);
        assert_eq!(catalog("U9b").unwrap().variant, Some(Variant::B));
    }

    #[test]
    fn unknown_label_lists_valid_ones() {
        match catalog("U4") {
            Err(Error::UnknownLabel { label, valid }) => {
                assert_eq!(label, "U4");
                assert_eq!(valid.len(), 13);
                assert!(valid.contains(&"U25b".to_string()));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn catalog_invariants() {
        for seq in full_catalog() {
            assert!(seq.len() % 2 == 1, "{}", seq.label);
            assert!(validate_symmetry(&seq), "{}", seq.label);
            assert_eq!(seq.phases[0], 0.0);
            assert_eq!(*seq.phases.last().unwrap(), 0.0);
        }
    }

    #[test]
    fn symmetry_examples() {
        let s = CompositeSequence::new("x", vec![0.0, PI / 2.0, 0.0], 0).unwrap();
        assert!(validate_symmetry(&s));
        let s = CompositeSequence::new("x", vec![0.0, PI / 2.0, PI], 0).unwrap();
        assert!(!validate_symmetry(&s));
        assert!(validate_symmetry(&catalog("U25b").unwrap()));
    }

    #[test]
    fn execute_examples() {
        let pi_pulse = analytic_rabi(1.0, 0.0, PI, 0.0);
        for seq in full_catalog() {
            let c = execute(&seq, &pi_pulse).unwrap();
            let raw = brute_force(&seq.phases, &pi_pulse);
            assert!(raw.get(0, 0).norm() < 1e-15, "{}", seq.label);
            assert!(c.q() < 1e-15, "{}", seq.label);
        }

        let u = make_propagator(0.4, 0.3, -1.0).unwrap();
        let single = CompositeSequence::new("one", vec![0.0], 0).unwrap();
        assert_eq!(execute(&single, &u).unwrap(), u);

        let base = analytic_rabi(1.0, 0.0, 0.8 * PI, 0.0);
        let u5a = catalog("U5a").unwrap();
        let q = infidelity(&execute(&u5a, &base).unwrap());
        let raw = brute_force(&u5a.phases, &base).get(0, 0).norm_sqr();
        assert!((q - raw).abs() < 1e-15);
        // inside the 1e-3 level at 0.8 τ, below 1e-4 from 0.85 τ on
        assert!((q - 2.311_920_685_036_8e-4).abs() < 1e-12, "Q = {q:e}");
        let closer = analytic_rabi(1.0, 0.0, 0.85 * PI, 0.0);
        assert!(infidelity(&execute(&u5a, &closer).unwrap()) < 1e-4);
    }

    #[test]
    fn offsets_must_match_length() {
        let seq = catalog("U3").unwrap();
        let u = Propagator::identity();
        assert!(execute_with_offsets(&seq, &u, &[0.0; 2]).is_err());
        assert_eq!(
            execute_with_offsets(&seq, &u, &[0.0; 3]).unwrap(),
            execute(&seq, &u).unwrap()
        );
    }

    #[test]
    fn json_record_keeps_printed_form() {
        let rec = serde_json::to_string(&catalog("U5a").unwrap().to_record()).unwrap();
        assert_eq!(
            rec,
            r#"{"label":"U5a","n":5,"jmax":2,"variant":"a","phases_over_pi":["0","5/6","2/6","5/6","0"]}"#
        );
        let rec = serde_json::to_value(catalog("U9a").unwrap().to_record()).unwrap();
        assert_eq!(rec["phases_over_pi"][1], serde_json::json!(0.635));
    }

    fn arb_base() -> impl Strategy<Value = Propagator> {
        (0.0..=1.0f64, -PI..PI, -PI..PI).prop_map(|(q, a, b)| make_propagator(q, a, b).unwrap())
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]
        #[test]
        fn catalog_shift_and_sign_invariance(base in arb_base(), shift in -7.0..7.0f64, idx in 0usize..13) {
            let seq = full_catalog().swap_remove(idx);
            let q0 = infidelity(&execute(&seq, &base).unwrap());
            let shifted = CompositeSequence::new("s", seq.phases.iter().map(|p| p + shift).collect(), 0).unwrap();
            let flipped = CompositeSequence::new("f", seq.phases.iter().map(|p| -p).collect(), 0).unwrap();
            prop_assert!((q0 - infidelity(&execute(&shifted, &base).unwrap())).abs() < 1e-12);
            prop_assert!((q0 - infidelity(&execute(&flipped, &base).unwrap())).abs() < 1e-12);
        }
    }
}
