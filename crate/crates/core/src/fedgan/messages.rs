use crate::nn::{GradSet, Matrix};

/// Everything that crosses a party boundary. Parties never see each
/// other's columns; the server sees only these payloads.
#[derive(Debug, Clone, PartialEq)]
pub enum ProtocolMessage {
    /// Intermediate features of a party's first critic part. `real` is absent
    /// during generator steps.
    FeatureUp {
        party: usize,
        real: Option<Matrix>,
        synthetic: Matrix,
    },
    /// Gradient of the server loss with respect to the features sent up.
    FeatureGradDown {
        party: usize,
        real: Option<Matrix>,
        synthetic: Matrix,
    },
    /// A party's slice of synthetic records, concatenated by the server.
    SyntheticPartUp { party: usize, rows: Matrix },
    /// Local gradients of the shared generator backbone.
    BackboneGradUp { party: usize, grads: GradSet },
    /// Aggregated backbone gradients broadcast to every party.
    BackboneGradDown { grads: GradSet },
}

impl ProtocolMessage {
    pub fn party(&self) -> Option<usize> {
        match self {
            ProtocolMessage::FeatureUp { party, .. }
            | ProtocolMessage::FeatureGradDown { party, .. }
            | ProtocolMessage::SyntheticPartUp { party, .. }
            | ProtocolMessage::BackboneGradUp { party, .. } => Some(*party),
            ProtocolMessage::BackboneGradDown { .. } => None,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            ProtocolMessage::FeatureUp { .. } => "FeatureUp",
            ProtocolMessage::FeatureGradDown { .. } => "FeatureGradDown",
            ProtocolMessage::SyntheticPartUp { .. } => "SyntheticPartUp",
            ProtocolMessage::BackboneGradUp { .. } => "BackboneGradUp",
            ProtocolMessage::BackboneGradDown { .. } => "BackboneGradDown",
        }
    }
}
