//! JSON form of a mixture:
//! `{dim, kind, nu?, weights[], components[{mean[], cov_lower[]}]}` where
//! `cov_lower` is the row-major lower triangle of the Cholesky factor,
//! diagonal included.

use serde::{Deserialize, Serialize};

use super::{CovarianceFactor, Kind, MixtureComponent, MixtureDensity};
use crate::error::{Error, Result};

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum KindTag {
    Gaussian,
    StudentT,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ComponentJson {
    mean: Vec<f64>,
    cov_lower: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MixtureJson {
    dim: usize,
    kind: KindTag,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    nu: Option<f64>,
    weights: Vec<f64>,
    components: Vec<ComponentJson>,
}

impl Serialize for MixtureDensity {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let dim = self.dim();
        let (kind, nu) = match self.kind() {
            Kind::Gaussian => (KindTag::Gaussian, None),
            Kind::StudentT { nu } => (KindTag::StudentT, Some(nu)),
        };
        let components = self
            .components()
            .iter()
            .map(|c| ComponentJson {
                mean: c.mean().to_vec(),
                cov_lower: (0..dim)
                    .flat_map(|i| (0..=i).map(move |j| (i, j)))
                    .map(|(i, j)| c.cov().entry(i, j))
                    .collect(),
            })
            .collect();
        MixtureJson {
            dim,
            kind,
            nu,
            weights: self.weights().to_vec(),
            components,
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for MixtureDensity {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = MixtureJson::deserialize(deserializer)?;
        raw.into_mixture().map_err(serde::de::Error::custom)
    }
}

impl MixtureJson {
    fn into_mixture(self) -> Result<MixtureDensity> {
        let kind = match (self.kind, self.nu) {
            (KindTag::Gaussian, None) => Kind::Gaussian,
            (KindTag::StudentT, Some(nu)) => Kind::StudentT { nu },
            (KindTag::Gaussian, Some(_)) => {
                return Err(Error::BadParams("`nu` given for a Gaussian mixture".into()))
            }
            (KindTag::StudentT, None) => {
                return Err(Error::BadParams("Student-t mixture without `nu`".into()))
            }
        };
        let d = self.dim;
        let tri = d * (d + 1) / 2;
        let components = self
            .components
            .into_iter()
            .map(|c| {
                if c.cov_lower.len() != tri {
                    return Err(Error::DimensionMismatch {
                        expected: tri,
                        got: c.cov_lower.len(),
                    });
                }
                let mut lower = vec![0.0; d * d];
                let mut it = c.cov_lower.into_iter();
                for i in 0..d {
                    for j in 0..=i {
                        lower[i * d + j] = it.next().expect("length checked");
                    }
                }
                MixtureComponent::new(c.mean, CovarianceFactor::from_lower(lower, d)?, kind)
            })
            .collect::<Result<Vec<_>>>()?;
        MixtureDensity::from_normalized(components, self.weights)
    }
}

impl MixtureDensity {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("mixture serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: MixtureJson = serde_json::from_str(text)?;
        raw.into_mixture()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn layout() {
        let cov = CovarianceFactor::from_covariance(&[4.0, 2.0, 2.0, 5.0], 2).unwrap();
        let c = MixtureComponent::student(vec![1.0, -1.0], cov, 12.0).unwrap();
        let m = MixtureDensity::new(vec![c], vec![1.0]).unwrap();
        let v: serde_json::Value = serde_json::from_str(&m.to_json()).unwrap();
        assert_eq!(v["dim"], 2);
        assert_eq!(v["kind"], "student_t");
        assert_eq!(v["nu"], 12.0);
        assert_eq!(v["components"][0]["cov_lower"], serde_json::json!([2.0, 1.0, 2.0]));
    }

    #[test]
    fn rejects_inconsistent_input() {
        let bad_nu = r#"{"dim":1,"kind":"gaussian","nu":3,"weights":[1],"components":[{"mean":[0],"cov_lower":[1]}]}"#;
        assert!(MixtureDensity::from_json(bad_nu).is_err());
        let bad_sum = r#"{"dim":1,"kind":"gaussian","weights":[0.5],"components":[{"mean":[0],"cov_lower":[1]}]}"#;
        assert!(MixtureDensity::from_json(bad_sum).is_err());
        let bad_tri = r#"{"dim":2,"kind":"gaussian","weights":[1],"components":[{"mean":[0,0],"cov_lower":[1,0]}]}"#;
        assert!(MixtureDensity::from_json(bad_tri).is_err());
    }

    proptest! {
        #[test]
        fn round_trip_is_exact(
            raw in prop::collection::vec((prop::collection::vec(-1e3f64..1e3, 3),
                                          prop::collection::vec(0.01f64..10.0, 6),
                                          0.001f64..1.0), 1..6),
            student in any::<bool>(),
        ) {
            let kind = if student { Kind::StudentT { nu: 7.25 } } else { Kind::Gaussian };
            let mut comps = Vec::new();
            let mut weights = Vec::new();
            for (mean, tri, w) in raw {
                let mut lower = vec![0.0; 9];
                lower[0] = tri[0];
                lower[3] = tri[1] - 5.0;
                lower[4] = tri[2];
                lower[6] = tri[3] - 5.0;
                lower[7] = tri[4] - 5.0;
                lower[8] = tri[5];
                let cov = CovarianceFactor::from_lower(lower, 3).unwrap();
                comps.push(MixtureComponent::new(mean, cov, kind).unwrap());
                weights.push(w);
            }
            let m = MixtureDensity::new(comps, weights).unwrap();
            let back = MixtureDensity::from_json(&m.to_json()).unwrap();
            prop_assert_eq!(back, m);
        }
    }
}
