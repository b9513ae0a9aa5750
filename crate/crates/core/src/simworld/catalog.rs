//! Bowls, foods and the physical-property classes that drive scooping
//! dynamics.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{ImrlError, Result};

/// Side length of the environment frame in pixels.
pub const FRAME: usize = 64;
/// Side length of the eye-in-hand frame in pixels.
pub const HAND: usize = 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PropertyClass {
    Solid,
    SemiSolid,
    Granular,
    Liquid,
    Mixture,
}

impl PropertyClass {
    pub const ALL: [PropertyClass; 5] = [
        PropertyClass::Solid,
        PropertyClass::SemiSolid,
        PropertyClass::Granular,
        PropertyClass::Liquid,
        PropertyClass::Mixture,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            PropertyClass::Solid => "solid",
            PropertyClass::SemiSolid => "semi-solid",
            PropertyClass::Granular => "granular",
            PropertyClass::Liquid => "liquid",
            PropertyClass::Mixture => "mixture",
        }
    }

    /// Liquid and mixture foods settle flat and centred in the bowl.
    pub fn is_fluid(self) -> bool {
        matches!(self, PropertyClass::Liquid | PropertyClass::Mixture)
    }

    pub fn has_items(self) -> bool {
        matches!(self, PropertyClass::Solid | PropertyClass::Mixture)
    }
}

impl fmt::Display for PropertyClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PropertyClass {
    type Err = ImrlError;

    fn from_str(s: &str) -> Result<Self> {
        PropertyClass::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| ImrlError::config("property", format!("unknown property class `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoodSpec {
    pub name: String,
    pub property: PropertyClass,
    pub color: [u8; 3],
    /// Maximum per-channel deviation of the texture from `color`.
    pub texture_amplitude: u8,
}

impl FoodSpec {
    pub fn new(name: &str, property: PropertyClass, color: [u8; 3], texture_amplitude: u8) -> Self {
        FoodSpec {
            name: name.to_string(),
            property,
            color,
            texture_amplitude,
        }
    }

    pub fn by_name(name: &str) -> Result<FoodSpec> {
        food_catalog()
            .into_iter()
            .find(|f| f.name == name)
            .ok_or_else(|| ImrlError::config("food", format!("unknown food `{name}`")))
    }
}

/// Every food type the generator knows. Type labels are indices into this
/// list.
pub fn food_catalog() -> Vec<FoodSpec> {
    use PropertyClass::*;
    vec![
        FoodSpec::new("apple", Solid, [226, 214, 140], 16),
        FoodSpec::new("carrot", Solid, [236, 120, 30], 16),
        FoodSpec::new("jello", SemiSolid, [196, 32, 52], 14),
        FoodSpec::new("yogurt", SemiSolid, [232, 220, 186], 12),
        FoodSpec::new("pudding", SemiSolid, [110, 62, 36], 14),
        FoodSpec::new("cereals", Granular, [214, 165, 72], 20),
        FoodSpec::new("rice", Granular, [240, 232, 200], 14),
        FoodSpec::new("beans", Granular, [58, 84, 40], 20),
        FoodSpec::new("water", Liquid, [110, 160, 225], 10),
        FoodSpec::new("milk", Liquid, [250, 250, 244], 6),
        FoodSpec::new("juice", Liquid, [250, 170, 40], 10),
        FoodSpec::new("soup", Mixture, [190, 100, 45], 14),
        FoodSpec::new("stew", Mixture, [128, 76, 44], 14),
    ]
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BowlShape {
    Circle,
    Square,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BowlSpec {
    pub name: String,
    pub shape: BowlShape,
    /// Interior radius (circle) or half side (square), pixels.
    pub radius: f64,
    pub wall: f64,
    pub rim_color: [u8; 3],
    pub interior_color: [u8; 3],
    pub center: (f64, f64),
}

pub const TABLE_COLOR: [u8; 3] = [120, 94, 70];

impl BowlSpec {
    fn centred(name: &str, shape: BowlShape, radius: f64, wall: f64, rim: [u8; 3], interior: [u8; 3]) -> Self {
        BowlSpec {
            name: name.to_string(),
            shape,
            radius,
            wall,
            rim_color: rim,
            interior_color: interior,
            center: (31.5, 31.5),
        }
    }

    /// The default white circular bowl.
    pub fn white_circular() -> Self {
        Self::centred("white-circular", BowlShape::Circle, 21.0, 3.0, [225, 228, 235], [200, 205, 215])
    }

    pub fn large_blue_circular() -> Self {
        Self::centred("large-blue-circular", BowlShape::Circle, 25.0, 3.0, [40, 70, 170], [70, 105, 190])
    }

    pub fn small_blue_circular() -> Self {
        Self::centred("small-blue-circular", BowlShape::Circle, 16.0, 3.0, [40, 70, 170], [70, 105, 190])
    }

    pub fn transparent_square() -> Self {
        Self::centred("transparent-square", BowlShape::Square, 18.0, 2.0, [176, 190, 196], [142, 124, 104])
    }

    pub fn by_name(name: &str) -> Result<BowlSpec> {
        [
            Self::white_circular(),
            Self::large_blue_circular(),
            Self::small_blue_circular(),
            Self::transparent_square(),
        ]
        .into_iter()
        .find(|b| b.name == name)
        .ok_or_else(|| ImrlError::config("bowl", format!("unknown bowl `{name}`")))
    }

    /// Interior area in square pixels.
    pub fn interior_area(&self) -> f64 {
        match self.shape {
            BowlShape::Circle => std::f64::consts::PI * self.radius * self.radius,
            BowlShape::Square => 4.0 * self.radius * self.radius,
        }
    }

    fn extent(&self, px: f64, py: f64) -> f64 {
        let (dx, dy) = (px - self.center.0, py - self.center.1);
        match self.shape {
            BowlShape::Circle => (dx * dx + dy * dy).sqrt(),
            BowlShape::Square => dx.abs().max(dy.abs()),
        }
    }

    pub fn in_interior(&self, px: f64, py: f64) -> bool {
        self.extent(px, py) <= self.radius
    }

    pub fn in_wall(&self, px: f64, py: f64) -> bool {
        let e = self.extent(px, py);
        e > self.radius && e <= self.radius + self.wall
    }

    /// Bowl must fit inside the frame with at least 2 px clearance.
    pub fn validate(&self) -> Result<()> {
        let outer = self.radius + self.wall;
        let (cx, cy) = self.center;
        let max = (FRAME - 1) as f64;
        if !(self.radius > 0.0 && self.wall >= 0.0) {
            return Err(ImrlError::config("bowl", "radius must be > 0 and wall >= 0"));
        }
        if cx - outer < 2.0 || cy - outer < 2.0 || cx + outer > max - 2.0 || cy + outer > max - 2.0 {
            return Err(ImrlError::config(
                "bowl",
                format!("bowl `{}` does not fit the {FRAME}px frame with 2px clearance", self.name),
            ));
        }
        Ok(())
    }
}
