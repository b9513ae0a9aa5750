use serde::{Deserialize, Serialize};

use super::catalog::{BowlSpec, FoodSpec};
use crate::error::{ImrlError, Result};

/// A named list of bowl and food pairings to evaluate on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvSuite {
    pub name: String,
    pub envs: Vec<(BowlSpec, FoodSpec)>,
}

pub const TRAINING_FOODS: [&str; 3] = ["cereals", "jello", "water"];
pub const UNSEEN_FOODS: [&str; 3] = ["beans", "yogurt", "milk"];
pub const UNSEEN_BOWLS: [&str; 3] = ["large-blue-circular", "small-blue-circular", "transparent-square"];
pub const SUITE_NAMES: [&str; 4] = ["in-distribution", "unseen-food", "unseen-bowl", "generalization"];

fn cross(bowls: &[&str], foods: &[&str]) -> Vec<(BowlSpec, FoodSpec)> {
    bowls
        .iter()
        .flat_map(|b| {
            foods.iter().map(move |f| {
                (
                    BowlSpec::by_name(b).expect("known bowl"),
                    FoodSpec::by_name(f).expect("known food"),
                )
            })
        })
        .collect()
}

impl EnvSuite {
    pub fn by_name(name: &str) -> Result<EnvSuite> {
        let envs = match name {
            "in-distribution" => cross(&["white-circular"], &TRAINING_FOODS),
            "unseen-food" => cross(&["white-circular"], &UNSEEN_FOODS),
            "unseen-bowl" => cross(&UNSEEN_BOWLS, &TRAINING_FOODS),
            "generalization" => {
                let mut v = cross(&["white-circular"], &UNSEEN_FOODS);
                v.extend(cross(&UNSEEN_BOWLS, &TRAINING_FOODS));
                v
            }
            other => {
                return Err(ImrlError::config(
                    "suite",
                    format!("unknown suite `{other}`; expected one of {SUITE_NAMES:?}"),
                ))
            }
        };
        Ok(EnvSuite {
            name: name.to_string(),
            envs,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simworld::catalog::PropertyClass;

    #[test]
    fn unseen_foods_reuse_seen_property_classes() {
        let seen: Vec<PropertyClass> = EnvSuite::by_name("in-distribution")
            .unwrap()
            .envs
            .iter()
            .map(|(_, f)| f.property)
            .collect();
        for (bowl, food) in EnvSuite::by_name("unseen-food").unwrap().envs {
            assert!(seen.contains(&food.property));
            assert!(!TRAINING_FOODS.contains(&food.name.as_str()));
            assert_eq!(bowl.name, "white-circular");
        }
        assert_eq!(EnvSuite::by_name("generalization").unwrap().envs.len(), 12);
        assert!(EnvSuite::by_name("moon").is_err());
    }
}
