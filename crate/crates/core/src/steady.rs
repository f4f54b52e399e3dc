//! Steady-state field values and parameter sweeps over them.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Violation};
use crate::fields::{derived_quantities, outgoing_field, steady_state_field, DerivedQuantities};
use crate::model::{validate, HybridState, MeasurementSettings, Schedule, SystemParams};
use crate::C64;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SteadyState {
    pub t: f64,
    pub drive: C64,
    pub alpha0: C64,
    pub alpha1: C64,
    pub photons0: f64,
    pub photons1: f64,
    /// Outgoing amplitudes, absent without output coupling.
    pub out0: Option<C64>,
    pub out1: Option<C64>,
    pub derived: DerivedQuantities,
}

/// Steady-state fields for the drive in effect at `t`.
pub fn steady_state(params: &SystemParams, settings: &MeasurementSettings, t: f64) -> Result<SteadyState> {
    validate(params, settings)?;
    let eps = params.drive.value_at(t);
    let a0 = steady_state_field(params, 0, eps);
    let a1 = steady_state_field(params, 1, eps);
    let out = |a| match outgoing_field(params, a, eps) {
        Ok(x) => Ok(Some(x)),
        Err(Error::NoOutputCoupling) => Ok(None),
        Err(e) => Err(e),
    };
    let state = HybridState::new(0.5, 0.5, C64::new(0.0, 0.0), a0, a1)?;
    Ok(SteadyState {
        t,
        drive: eps,
        alpha0: a0,
        alpha1: a1,
        photons0: a0.norm_sqr(),
        photons1: a1.norm_sqr(),
        out0: out(a0)?,
        out1: out(a1)?,
        derived: derived_quantities(&state, params, settings, t),
    })
}

/// Quantity varied along one sweep axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    Chi,
    /// Total decay rate; the output and collected parts keep their ratios.
    Kappa,
    /// Constant real drive amplitude.
    Epsilon,
    /// Total efficiency, set through the amplifier efficiency.
    Eta,
    /// Constant amplified phase.
    PhiA,
}

impl std::str::FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "chi" => SweepParam::Chi,
            "kappa" => SweepParam::Kappa,
            "epsilon" | "eps" => SweepParam::Epsilon,
            "eta" => SweepParam::Eta,
            "phi_a" => SweepParam::PhiA,
            _ => return Err(Error::Config(vec![Violation::new("sweep", format!("unknown parameter {s:?}"))])),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepAxis {
    pub param: SweepParam,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub values: Vec<f64>,
    pub steady: SteadyState,
}

fn apply(param: SweepParam, x: f64, params: &mut SystemParams, settings: &mut MeasurementSettings) {
    match param {
        SweepParam::Chi => params.chi = x,
        SweepParam::Kappa => {
            let scale = x / params.kappa;
            params.kappa = x;
            params.kappa_out *= scale;
            params.kappa_col *= scale;
        }
        SweepParam::Epsilon => params.drive = Schedule::constant(C64::new(x, 0.0)),
        SweepParam::Eta => settings.eta_amp = x / params.eta_col(),
        SweepParam::PhiA => settings.amplified_phase = Schedule::constant(x),
    }
}

/// Steady state on the Cartesian product of the axes, last axis fastest.
pub fn sweep(params: &SystemParams, settings: &MeasurementSettings, axes: &[SweepAxis], t: f64) -> Result<Vec<SweepPoint>> {
    let total: usize = axes.iter().map(|a| a.values.len()).product();
    let mut out = Vec::with_capacity(total);
    for flat in 0..total {
        let mut rest = flat;
        let mut idx = vec![0; axes.len()];
        for (k, axis) in axes.iter().enumerate().rev() {
            idx[k] = rest % axis.values.len();
            rest /= axis.values.len();
        }
        let (mut p, mut s) = (params.clone(), settings.clone());
        // kappa first so that eta sees the final collection efficiency
        let mut order: Vec<usize> = (0..axes.len()).collect();
        order.sort_by_key(|&k| axes[k].param != SweepParam::Kappa);
        for k in order {
            apply(axes[k].param, axes[k].values[idx[k]], &mut p, &mut s);
        }
        let values = axes.iter().zip(&idx).map(|(a, &i)| a.values[i]).collect();
        out.push(SweepPoint { values, steady: steady_state(&p, &s, t)? });
    }
    Ok(out)
}
