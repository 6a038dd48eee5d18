//! On-disk state documents: explicit (re, im) amplitude pairs over named
//! subsystems. No expression parsing; √3/2 is written out numerically.

use envariance_core::statespace::{PureState, SubsystemLayout};
use envariance_core::Tolerances;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SubsystemDoc {
    pub id: String,
    pub labels: Vec<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComponentDoc {
    pub labels: Vec<String>,
    pub re: f64,
    pub im: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StateDocument {
    pub subsystems: Vec<SubsystemDoc>,
    pub components: Vec<ComponentDoc>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub normalize: bool,
}

impl StateDocument {
    pub fn to_state(&self, tol: &Tolerances) -> envariance_core::Result<PureState> {
        let layout = SubsystemLayout::new(
            self.subsystems
                .iter()
                .map(|s| (s.id.clone(), s.labels.clone())),
        )?;
        let components = self
            .components
            .iter()
            .map(|c| (c.labels.clone(), Complex64::new(c.re, c.im)));
        if self.normalize {
            PureState::build_normalized(layout, components, tol)
        } else {
            PureState::build(layout, components, tol)
        }
    }

    pub fn from_state(state: &PureState) -> StateDocument {
        let subsystems = state
            .layout()
            .subsystems()
            .iter()
            .map(|sub| SubsystemDoc {
                id: sub.id().to_owned(),
                labels: sub.labels().to_vec(),
            })
            .collect();
        let components = state
            .labeled_components()
            .map(|(labels, amp)| ComponentDoc {
                labels: labels.into_iter().map(str::to_owned).collect(),
                re: amp.re,
                im: amp.im,
            })
            .collect();
        StateDocument {
            subsystems,
            components,
            normalize: false,
        }
    }
}
