//! Header label codes and the fixed property catalogue.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Number of classes a header can take (other, constituent, composition,
/// material id, and the 18 properties).
pub const NUM_CLASSES: usize = 22;

/// Integer class assigned to a row or column header.
///
/// `0` other, `1` constituent, `2` composition, `3` material identifier,
/// `4..=21` the properties in [`Property::ALL`] order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct LabelCode(u8);

impl LabelCode {
    pub const OTHER: LabelCode = LabelCode(0);
    pub const CONSTITUENT: LabelCode = LabelCode(1);
    pub const COMPOSITION: LabelCode = LabelCode(2);
    pub const MATERIAL_ID: LabelCode = LabelCode(3);

    pub fn new(code: u8) -> Result<Self, Error> {
        if (code as usize) < NUM_CLASSES {
            Ok(LabelCode(code))
        } else {
            Err(Error::InvalidLabel(code as i64))
        }
    }

    pub fn code(self) -> u8 {
        self.0
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn is_other(self) -> bool {
        self.0 == 0
    }

    /// Constituent, composition or material id.
    pub fn is_composition_role(self) -> bool {
        (1..=3).contains(&self.0)
    }

    pub fn property(self) -> Option<Property> {
        Property::from_code(self.0)
    }

    pub fn is_property(self) -> bool {
        self.0 >= 4
    }
}

impl TryFrom<u8> for LabelCode {
    type Error = Error;

    fn try_from(code: u8) -> Result<Self, Error> {
        LabelCode::new(code)
    }
}

impl From<LabelCode> for u8 {
    fn from(l: LabelCode) -> u8 {
        l.0
    }
}

impl From<Property> for LabelCode {
    fn from(p: Property) -> LabelCode {
        LabelCode(p.code())
    }
}

impl fmt::Display for LabelCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// The 18 target material properties.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Property {
    ActivationEnergy,
    AnnealingPoint,
    CrystallizationTemperature,
    GlassTransitionTemperature,
    LiquidusTemperature,
    MeltingTemperature,
    SofteningPoint,
    ThermalExpansionCoefficient,
    BulkModulus,
    Density,
    FractureToughness,
    Hardness,
    PoissonRatio,
    ShearModulus,
    YoungsModulus,
    AbbeValue,
    RefractiveIndex,
    ElectricalConductivity,
}

impl Property {
    pub const ALL: [Property; 18] = [
        Property::ActivationEnergy,
        Property::AnnealingPoint,
        Property::CrystallizationTemperature,
        Property::GlassTransitionTemperature,
        Property::LiquidusTemperature,
        Property::MeltingTemperature,
        Property::SofteningPoint,
        Property::ThermalExpansionCoefficient,
        Property::BulkModulus,
        Property::Density,
        Property::FractureToughness,
        Property::Hardness,
        Property::PoissonRatio,
        Property::ShearModulus,
        Property::YoungsModulus,
        Property::AbbeValue,
        Property::RefractiveIndex,
        Property::ElectricalConductivity,
    ];

    pub fn code(self) -> u8 {
        4 + Property::ALL.iter().position(|p| *p == self).unwrap() as u8
    }

    pub fn from_code(code: u8) -> Option<Property> {
        if code < 4 {
            return None;
        }
        Property::ALL.get((code - 4) as usize).copied()
    }

    pub fn label(self) -> LabelCode {
        LabelCode::from(self)
    }

    /// Stable snake_case key used in files and config.
    pub fn key(self) -> &'static str {
        match self {
            Property::ActivationEnergy => "activation_energy",
            Property::AnnealingPoint => "annealing_point",
            Property::CrystallizationTemperature => "crystallization_temperature",
            Property::GlassTransitionTemperature => "glass_transition_temperature",
            Property::LiquidusTemperature => "liquidus_temperature",
            Property::MeltingTemperature => "melting_temperature",
            Property::SofteningPoint => "softening_point",
            Property::ThermalExpansionCoefficient => "thermal_expansion_coefficient",
            Property::BulkModulus => "bulk_modulus",
            Property::Density => "density",
            Property::FractureToughness => "fracture_toughness",
            Property::Hardness => "hardness",
            Property::PoissonRatio => "poisson_ratio",
            Property::ShearModulus => "shear_modulus",
            Property::YoungsModulus => "youngs_modulus",
            Property::AbbeValue => "abbe_value",
            Property::RefractiveIndex => "refractive_index",
            Property::ElectricalConductivity => "electrical_conductivity",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            Property::ActivationEnergy => "Activation energy",
            Property::AnnealingPoint => "Annealing point",
            Property::CrystallizationTemperature => "Crystallization temperature",
            Property::GlassTransitionTemperature => "Glass transition temperature",
            Property::LiquidusTemperature => "Liquidus temperature",
            Property::MeltingTemperature => "Melting temperature",
            Property::SofteningPoint => "Softening point",
            Property::ThermalExpansionCoefficient => "Thermal expansion coefficient",
            Property::BulkModulus => "Bulk modulus",
            Property::Density => "Density",
            Property::FractureToughness => "Fracture toughness",
            Property::Hardness => "Hardness",
            Property::PoissonRatio => "Poisson ratio",
            Property::ShearModulus => "Shear modulus",
            Property::YoungsModulus => "Young's modulus",
            Property::AbbeValue => "Abbe value",
            Property::RefractiveIndex => "Refractive index",
            Property::ElectricalConductivity => "Electrical conductivity",
        }
    }

    pub fn is_temperature(self) -> bool {
        matches!(
            self,
            Property::AnnealingPoint
                | Property::CrystallizationTemperature
                | Property::GlassTransitionTemperature
                | Property::LiquidusTemperature
                | Property::MeltingTemperature
                | Property::SofteningPoint
        )
    }
}

impl fmt::Display for Property {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for Property {
    type Err = Error;

    /// Accepts the snake_case key, the display name, or a loose spelling
    /// ("Young's modulus", "youngs-modulus", "poisson").
    fn from_str(s: &str) -> Result<Self, Error> {
        let squash = |t: &str| {
            t.chars()
                .filter(|c| c.is_ascii_alphanumeric())
                .collect::<String>()
                .to_ascii_lowercase()
        };
        let wanted = squash(s);
        if wanted.is_empty() {
            return Err(Error::UnknownProperty(s.to_string()));
        }
        Property::ALL
            .iter()
            .copied()
            .find(|p| squash(p.key()) == wanted || squash(p.display_name()) == wanted)
            .or_else(|| match wanted.as_str() {
                "poisson" | "poissonsratio" => Some(Property::PoissonRatio),
                "tg" => Some(Property::GlassTransitionTemperature),
                "abbenumber" => Some(Property::AbbeValue),
                "conductivity" => Some(Property::ElectricalConductivity),
                "cte" => Some(Property::ThermalExpansionCoefficient),
                _ => None,
            })
            .ok_or_else(|| Error::UnknownProperty(s.to_string()))
    }
}
