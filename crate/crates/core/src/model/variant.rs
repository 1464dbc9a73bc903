use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// The architectures compared in the ablation tables.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModelVariant {
    #[serde(rename = "LSTM")]
    Lstm,
    #[serde(rename = "LSTM_ATTRIBUTES")]
    LstmAttributes,
    #[serde(rename = "LSTM_ATTENTION")]
    LstmAttention,
    #[serde(rename = "LSTM_ADVERSARIAL")]
    LstmAdversarial,
    #[serde(rename = "NPD_GENDER")]
    NpdGender,
    #[serde(rename = "NPD_LOCATION")]
    NpdLocation,
    #[serde(rename = "NPD")]
    Npd,
}

/// How the emotion heads' input `H` is formed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Representation {
    LastHidden,
    GenderAttention,
    LocationAttention,
    BothAttentions,
}

/// Where a discriminator reads from and whether its gradient is reversed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DiscriminatorWiring {
    pub from_attention: bool,
    pub reversed: bool,
}

impl ModelVariant {
    pub const ALL: [ModelVariant; 7] = [
        ModelVariant::Lstm,
        ModelVariant::LstmAttributes,
        ModelVariant::LstmAttention,
        ModelVariant::LstmAdversarial,
        ModelVariant::NpdGender,
        ModelVariant::NpdLocation,
        ModelVariant::Npd,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelVariant::Lstm => "LSTM",
            ModelVariant::LstmAttributes => "LSTM_ATTRIBUTES",
            ModelVariant::LstmAttention => "LSTM_ATTENTION",
            ModelVariant::LstmAdversarial => "LSTM_ADVERSARIAL",
            ModelVariant::NpdGender => "NPD_GENDER",
            ModelVariant::NpdLocation => "NPD_LOCATION",
            ModelVariant::Npd => "NPD",
        }
    }

    pub fn representation(self) -> Representation {
        match self {
            ModelVariant::Lstm | ModelVariant::LstmAttributes | ModelVariant::LstmAdversarial => {
                Representation::LastHidden
            }
            ModelVariant::NpdGender => Representation::GenderAttention,
            ModelVariant::NpdLocation => Representation::LocationAttention,
            ModelVariant::LstmAttention | ModelVariant::Npd => Representation::BothAttentions,
        }
    }

    pub fn gender_discriminator(self) -> Option<DiscriminatorWiring> {
        match self {
            ModelVariant::LstmAttributes => Some(DiscriminatorWiring {
                from_attention: false,
                reversed: false,
            }),
            ModelVariant::LstmAdversarial => Some(DiscriminatorWiring {
                from_attention: false,
                reversed: true,
            }),
            ModelVariant::NpdGender | ModelVariant::Npd => Some(DiscriminatorWiring {
                from_attention: true,
                reversed: true,
            }),
            _ => None,
        }
    }

    pub fn location_discriminator(self) -> Option<DiscriminatorWiring> {
        match self {
            ModelVariant::NpdGender => None,
            ModelVariant::NpdLocation => Some(DiscriminatorWiring {
                from_attention: true,
                reversed: true,
            }),
            other => other.gender_discriminator(),
        }
    }

    /// Width of `H` for a given LSTM hidden size.
    pub fn representation_dim(self, hidden_dim: usize) -> usize {
        match self.representation() {
            Representation::BothAttentions => 2 * hidden_dim,
            _ => hidden_dim,
        }
    }
}

impl fmt::Display for ModelVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelVariant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let wanted = s.trim().to_ascii_uppercase().replace('-', "_");
        ModelVariant::ALL
            .into_iter()
            .find(|v| v.name() == wanted)
            .ok_or_else(|| {
                let names: Vec<_> = ModelVariant::ALL.iter().map(|v| v.name()).collect();
                format!("unknown variant `{s}` (expected one of {})", names.join(", "))
            })
    }
}
