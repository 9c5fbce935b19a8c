use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rates and Hamiltonian constants of the NV⁻/NV⁰–¹⁴N model.
///
/// Rates are in MHz (events per µs). Hamiltonian constants are cyclic
/// frequencies in MHz except `delta_es` (GHz) and `gamma_n` (kHz/G), which
/// keep the units they are usually quoted in; [`super::hamiltonian`] does the
/// conversion. `k_67` and `k_73` are not separate parameters: they equal
/// `k_47` and `k_71`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    pub k_r: f64,
    pub k_47: f64,
    pub k_57: f64,
    pub k_71: f64,
    pub k_72: f64,
    pub beta: f64,
    pub k_ion: f64,
    pub k_deion: f64,
    pub a_par: f64,
    pub a_perp: f64,
    pub c_par: f64,
    pub c_perp: f64,
    pub delta_es: f64,
    pub q: f64,
    pub gamma_e: f64,
    pub gamma_n: f64,
    pub b_field: f64,
    pub collection_efficiency: f64,
    /// Fraction of NV⁻ ionization events landing in NV⁰ `m_s = -1/2`.
    #[serde(default = "default_ion_branch")]
    pub ion_branch_down: f64,
    /// `m_s` of the NV⁻ ground level reached by deionization.
    #[serde(default)]
    pub deion_ms: i8,
}

fn default_ion_branch() -> f64 {
    0.5
}

/// One failed range or schema check.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub field: String,
    pub message: String,
}

impl Diagnostic {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Diagnostic { field: field.into(), message: message.into() }
    }
}

/// Reference rates with the given transverse hyperfine coupling and
/// ionization strength. `k_deion` is tied to `2·k_ion`.
pub fn default_params(a_perp: f64, k_ion_coeff: f64, beta: f64) -> Result<PhysicalParams> {
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(Error::InvalidParameter(format!("beta must be positive, got {beta}")));
    }
    if !(k_ion_coeff > 0.0) || !k_ion_coeff.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "ionization coefficient must be positive, got {k_ion_coeff}"
        )));
    }
    if !(a_perp < 0.0) {
        return Err(Error::InvalidParameter(format!("A_perp must be negative, got {a_perp}")));
    }
    let k_ion = k_ion_coeff * beta;
    Ok(PhysicalParams {
        k_r: 65.9,
        k_47: 92.1,
        k_57: 11.4,
        k_71: 1.18,
        k_72: 4.84,
        beta,
        k_ion,
        k_deion: 2.0 * k_ion,
        a_par: -40.0,
        a_perp,
        c_par: -40.0,
        c_perp: -40.0,
        delta_es: 1.42,
        q: -4.945,
        gamma_e: 2.802,
        gamma_n: -0.308,
        b_field: 7500.0,
        collection_efficiency: 0.30,
        ion_branch_down: 0.5,
        deion_ms: 0,
    })
}

impl Default for PhysicalParams {
    fn default() -> Self {
        default_params(-50.0, 90.0, 1.0).expect("default parameters are valid")
    }
}

impl PhysicalParams {
    /// Ionization rate per unit `beta`.
    pub fn ionization_coefficient(&self) -> f64 {
        self.k_ion / self.beta
    }

    /// Rescales the laser power, keeping `k_ion` and `k_deion` proportional to `beta`.
    pub fn with_beta(&self, beta: f64) -> Result<PhysicalParams> {
        if !(beta >= 0.0) || !beta.is_finite() {
            return Err(Error::InvalidParameter(format!("beta must be non-negative, got {beta}")));
        }
        if !(self.beta > 0.0) {
            return Err(Error::InvalidParameter(
                "cannot rescale from beta = 0; ionization coefficient is undefined".into(),
            ));
        }
        let scale = beta / self.beta;
        Ok(PhysicalParams {
            beta,
            k_ion: self.k_ion * scale,
            k_deion: self.k_deion * scale,
            ..self.clone()
        })
    }

    /// Every range violation, empty when the parameters are usable.
    pub fn diagnostics(&self) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        let rates = [
            ("k_r", self.k_r),
            ("k_47", self.k_47),
            ("k_57", self.k_57),
            ("k_71", self.k_71),
            ("k_72", self.k_72),
            ("beta", self.beta),
            ("k_ion", self.k_ion),
            ("k_deion", self.k_deion),
        ];
        for (name, value) in rates {
            if !value.is_finite() || value < 0.0 {
                out.push(Diagnostic::new(name, format!("rate must be finite and >= 0, got {value}")));
            }
        }
        let constants = [
            ("a_par", self.a_par),
            ("a_perp", self.a_perp),
            ("c_par", self.c_par),
            ("c_perp", self.c_perp),
            ("delta_es", self.delta_es),
            ("q", self.q),
            ("gamma_e", self.gamma_e),
            ("gamma_n", self.gamma_n),
            ("b_field", self.b_field),
        ];
        for (name, value) in constants {
            if !value.is_finite() {
                out.push(Diagnostic::new(name, format!("must be finite, got {value}")));
            }
        }
        if !(0.0..=1.0).contains(&self.collection_efficiency) {
            out.push(Diagnostic::new(
                "collection_efficiency",
                format!("must lie in [0, 1], got {}", self.collection_efficiency),
            ));
        }
        if !(0.0..=1.0).contains(&self.ion_branch_down) {
            out.push(Diagnostic::new(
                "ion_branch_down",
                format!("must lie in [0, 1], got {}", self.ion_branch_down),
            ));
        }
        if !(-1..=1).contains(&self.deion_ms) {
            out.push(Diagnostic::new("deion_ms", format!("must be -1, 0 or 1, got {}", self.deion_ms)));
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        match self.diagnostics().into_iter().next() {
            None => Ok(()),
            Some(d) => Err(Error::InvalidParameter(format!("{}: {}", d.field, d.message))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_one_defaults() {
        let p = default_params(-50.0, 90.0, 1.0).unwrap();
        assert_eq!(p.k_r, 65.9);
        assert_eq!(p.k_47, 92.1);
        assert_eq!(p.k_57, 11.4);
        assert_eq!(p.k_71, 1.18);
        assert_eq!(p.k_72, 4.84);
        assert_eq!(p.k_ion, 90.0);
        assert_eq!(p.k_deion, 180.0);
        assert_eq!(p.delta_es, 1.42);
        assert_eq!(p.q, -4.945);
        assert_eq!(p.gamma_e, 2.802);
        assert_eq!(p.gamma_n, -0.308);
        assert_eq!((p.a_par, p.c_par, p.c_perp), (-40.0, -40.0, -40.0));
        assert_eq!(p.b_field, 7500.0);
        assert_eq!(p.collection_efficiency, 0.30);
        assert!(p.diagnostics().is_empty());
    }

    #[test]
    fn ionization_scales_with_beta() {
        let p = default_params(-50.0, 90.0, 0.5).unwrap();
        assert_eq!(p.k_ion, 45.0);
        assert_eq!(p.k_deion, 90.0);

        let q = default_params(-40.0, 70.0, 1.0).unwrap();
        assert_eq!(q.a_perp, -40.0);
        assert_eq!(q.k_ion, 70.0);
        assert_eq!(q.k_47, 92.1);

        let r = q.with_beta(0.25).unwrap();
        assert!((r.k_ion - 17.5).abs() < 1e-12);
        assert!((r.k_deion - 35.0).abs() < 1e-12);
        assert!((r.ionization_coefficient() - 70.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_builder_inputs() {
        assert!(matches!(default_params(-50.0, 90.0, 0.0), Err(Error::InvalidParameter(_))));
        assert!(matches!(default_params(-50.0, -1.0, 1.0), Err(Error::InvalidParameter(_))));
        assert!(matches!(default_params(10.0, 90.0, 1.0), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn diagnostics_flag_efficiency() {
        let mut p = PhysicalParams::default();
        p.collection_efficiency = 1.3;
        let d = p.diagnostics();
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].field, "collection_efficiency");
        assert!(p.validate().is_err());
    }
}
