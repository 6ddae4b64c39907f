use serde::{Deserialize, Serialize};

use crate::channel::{ChannelKind, ModelParams};
use crate::error::{Error, Result};

/// A scalar model parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Param {
    DelayAb,
    ClockOffsetAb,
    PhaseOffsetAb,
    DelayAr,
    ReflectionPhase,
    GainAb,
    GainAr,
}

impl Param {
    pub fn label(self) -> &'static str {
        match self {
            Param::DelayAb => "delay_ab",
            Param::ClockOffsetAb => "clock_offset_ab",
            Param::PhaseOffsetAb => "phase_offset_ab",
            Param::DelayAr => "delay_ar",
            Param::ReflectionPhase => "reflection_phase",
            Param::GainAb => "gain_ab",
            Param::GainAr => "gain_ar",
        }
    }

    pub fn from_label(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|p| p.label() == s)
    }

    /// SI unit of the stored value.
    pub fn unit(self) -> &'static str {
        match self {
            Param::DelayAb | Param::ClockOffsetAb | Param::DelayAr => "s",
            Param::PhaseOffsetAb | Param::ReflectionPhase => "rad",
            Param::GainAb | Param::GainAr => "1",
        }
    }

    pub fn is_phase(self) -> bool {
        matches!(self, Param::PhaseOffsetAb | Param::ReflectionPhase)
    }

    pub fn truth(self, p: &ModelParams) -> f64 {
        match self {
            Param::DelayAb => p.delay_ab_s,
            Param::ClockOffsetAb => p.clock_offset_ab_s,
            Param::PhaseOffsetAb => p.phase_offset_ab_rad,
            Param::DelayAr => p.delay_ar_s,
            Param::ReflectionPhase => p.reflection_phase_rad,
            Param::GainAb => p.gain_ab,
            Param::GainAr => p.gain_ar,
        }
    }

    pub const ALL: [Param; 7] = [
        Param::DelayAb,
        Param::ClockOffsetAb,
        Param::PhaseOffsetAb,
        Param::DelayAr,
        Param::ReflectionPhase,
        Param::GainAb,
        Param::GainAr,
    ];
}

impl std::fmt::Display for Param {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// Which of the four unknown sets is being estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParameterVariant {
    KnownPosTwoPath,
    KnownPosLos,
    UnknownPosTwoPath,
    UnknownPosLos,
}

impl ParameterVariant {
    pub fn new(positions_known: bool, channel: ChannelKind) -> Self {
        match (positions_known, channel) {
            (true, ChannelKind::TwoPath) => Self::KnownPosTwoPath,
            (true, ChannelKind::Los) => Self::KnownPosLos,
            (false, ChannelKind::TwoPath) => Self::UnknownPosTwoPath,
            (false, ChannelKind::Los) => Self::UnknownPosLos,
        }
    }

    pub fn positions_known(self) -> bool {
        matches!(self, Self::KnownPosTwoPath | Self::KnownPosLos)
    }

    pub fn channel(self) -> ChannelKind {
        match self {
            Self::KnownPosTwoPath | Self::UnknownPosTwoPath => ChannelKind::TwoPath,
            Self::KnownPosLos | Self::UnknownPosLos => ChannelKind::Los,
        }
    }

    /// Every parameter of the variant, in canonical order.
    pub fn all_params(self) -> &'static [Param] {
        use Param::*;
        match self {
            Self::KnownPosTwoPath => &[ClockOffsetAb, PhaseOffsetAb, DelayAr, ReflectionPhase, GainAb, GainAr],
            Self::KnownPosLos => &[ClockOffsetAb, PhaseOffsetAb, GainAb],
            Self::UnknownPosTwoPath => {
                &[DelayAb, ClockOffsetAb, PhaseOffsetAb, DelayAr, ReflectionPhase, GainAb, GainAr]
            }
            Self::UnknownPosLos => &[DelayAb, ClockOffsetAb, PhaseOffsetAb, GainAb],
        }
    }

    /// Parameters left unknown once the map knowledge is applied.
    pub fn free_params(self, map: MapKnowledge) -> Vec<Param> {
        self.all_params()
            .iter()
            .copied()
            .filter(|p| match p {
                Param::DelayAr => !map.delay_ar_known,
                Param::ReflectionPhase => !map.reflection_phase_known,
                _ => true,
            })
            .collect()
    }

    pub fn check_map(self, map: MapKnowledge) -> Result<()> {
        if self.channel() == ChannelKind::Los && map.any() {
            return Err(Error::Model(format!(
                "map knowledge only applies to two-path estimators, not {self:?}"
            )));
        }
        Ok(())
    }
}

/// Prior knowledge about the reflection.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MapKnowledge {
    pub delay_ar_known: bool,
    pub reflection_phase_known: bool,
}

impl MapKnowledge {
    pub const UNKNOWN: Self = Self {
        delay_ar_known: false,
        reflection_phase_known: false,
    };
    pub const KNOWN: Self = Self {
        delay_ar_known: true,
        reflection_phase_known: true,
    };

    pub fn any(self) -> bool {
        self.delay_ar_known || self.reflection_phase_known
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamValue {
    pub param: Param,
    pub value: f64,
}

/// Values for the free parameters of a variant, in canonical order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterVector {
    pub variant: ParameterVariant,
    pub map: MapKnowledge,
    pub entries: Vec<ParamValue>,
}

impl ParameterVector {
    pub fn new(variant: ParameterVariant, map: MapKnowledge, values: &[f64]) -> Result<Self> {
        variant.check_map(map)?;
        let params = variant.free_params(map);
        if params.len() != values.len() {
            return Err(Error::Dimension {
                expected: params.len(),
                found: values.len(),
            });
        }
        Ok(Self {
            variant,
            map,
            entries: params
                .into_iter()
                .zip(values)
                .map(|(param, &value)| ParamValue { param, value })
                .collect(),
        })
    }

    /// The true free parameters of a synthesized scenario.
    pub fn truth(variant: ParameterVariant, map: MapKnowledge, p: &ModelParams) -> Result<Self> {
        let values: Vec<f64> = variant.free_params(map).iter().map(|q| q.truth(p)).collect();
        Self::new(variant, map, &values)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, param: Param) -> Option<f64> {
        self.entries.iter().find(|e| e.param == param).map(|e| e.value)
    }

    pub fn params(&self) -> impl Iterator<Item = Param> + '_ {
        self.entries.iter().map(|e| e.param)
    }

    pub fn values(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.value).collect()
    }
}
