use serde::{Deserialize, Serialize};

use super::Family;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilySpec {
    pub function: Family,
    pub drives: Vec<u32>,
}

/// Generator and oracle settings. Lengths in nm, resistances in Ω,
/// capacitances in aF unless the name says fF.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub seed: u64,
    pub families: Vec<FamilySpec>,
    pub variants_per_type: usize,
    /// Largest allowed cell edge.
    pub canvas_nm: f64,
    pub wire_width_nm: f64,
    pub sheet_res_ohm_sq: f64,
    pub area_cap_af_per_nm2: f64,
    pub fringe_cap_af_per_nm: f64,
    /// Coupling between parallel wires is `coupling_cap_af · overlap / spacing`.
    pub coupling_cap_af: f64,
    pub coupling_max_spacing_nm: f64,
    pub load_cap_ff: f64,
    /// Characterization condition recorded with the dataset.
    pub input_slew_ps: f64,
    pub vdd_v: f64,
    /// On-resistance is `k · L / W`.
    pub nmos_k_ohm: f64,
    pub pmos_k_ohm: f64,
    /// Drive-1 device widths; drive `n` multiplies them by `n`.
    pub nmos_width_nm: f64,
    pub pmos_width_nm: f64,
    pub channel_length_nm: f64,
    pub diffusion_cap_af_per_nm: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            families: Family::ALL
                .iter()
                .map(|&function| FamilySpec {
                    function,
                    drives: vec![1, 2],
                })
                .collect(),
            variants_per_type: 10,
            canvas_nm: 1000.0,
            wire_width_nm: 20.0,
            sheet_res_ohm_sq: 2.0,
            area_cap_af_per_nm2: 0.01,
            fringe_cap_af_per_nm: 0.04,
            coupling_cap_af: 1.0,
            coupling_max_spacing_nm: 60.0,
            load_cap_ff: 0.5,
            input_slew_ps: 10.0,
            vdd_v: 0.7,
            nmos_k_ohm: 20000.0,
            pmos_k_ohm: 30000.0,
            nmos_width_nm: 80.0,
            pmos_width_nm: 120.0,
            channel_length_nm: 20.0,
            diffusion_cap_af_per_nm: 0.5,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(format!("synth: {m}")));
        let positive = [
            ("canvas_nm", self.canvas_nm),
            ("wire_width_nm", self.wire_width_nm),
            ("sheet_res_ohm_sq", self.sheet_res_ohm_sq),
            ("area_cap_af_per_nm2", self.area_cap_af_per_nm2),
            ("fringe_cap_af_per_nm", self.fringe_cap_af_per_nm),
            ("coupling_cap_af", self.coupling_cap_af),
            ("coupling_max_spacing_nm", self.coupling_max_spacing_nm),
            ("load_cap_ff", self.load_cap_ff),
            ("input_slew_ps", self.input_slew_ps),
            ("vdd_v", self.vdd_v),
            ("nmos_k_ohm", self.nmos_k_ohm),
            ("pmos_k_ohm", self.pmos_k_ohm),
            ("nmos_width_nm", self.nmos_width_nm),
            ("pmos_width_nm", self.pmos_width_nm),
            ("channel_length_nm", self.channel_length_nm),
            ("diffusion_cap_af_per_nm", self.diffusion_cap_af_per_nm),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if self.wire_width_nm > super::layout::MAX_WIRE_WIDTH_NM {
            return bad(format!(
                "wire_width_nm must be at most {}",
                super::layout::MAX_WIRE_WIDTH_NM
            ));
        }
        if self.variants_per_type < 2 {
            return bad("variants_per_type must be at least 2".into());
        }
        if self.families.is_empty() {
            return bad("no families configured".into());
        }
        for f in &self.families {
            if f.drives.is_empty() || f.drives.contains(&0) {
                return bad(format!(
                    "{:?}: drives must be non-empty and positive",
                    f.function
                ));
            }
        }
        Ok(())
    }

    pub fn num_cells(&self) -> usize {
        self.families.iter().map(|f| f.drives.len()).sum::<usize>() * self.variants_per_type
    }
}
