use crate::error::{Error, Result};
use crate::io::Ini;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IdentifyStrategy {
    /// A zero-target (steady-state) library moves column `target_index` to
    /// the left-hand side.
    SpecifiedTarget,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DropStrategy {
    /// Drop the operator whose removal raises the loss least.
    MostInsignificant,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegressionMethod {
    Ols,
    Ridge,
}

/// Settings of the `[VSI]` and `[StepwiseRegression]` sections.
#[derive(Debug, Clone, PartialEq)]
pub struct StepwiseConfig {
    pub data_dir: String,
    pub identify_strategy: IdentifyStrategy,
    pub target_index: usize,
    pub basis_drop_strategy: DropStrategy,
    pub regression_method: RegressionMethod,
    pub alpha_ridge: f64,
    pub f_criteria: f64,
    /// Keep eliminating past the stopping point down to one operator.
    pub full_path: bool,
    /// Relative tolerance of the confirmation test.
    pub confirmation_tolerance: f64,
    /// Residual norms below `precision_floor * ‖y‖` count as exact fits
    /// when forming F statistics.
    pub precision_floor: f64,
    /// Candidate drops within this relative loss margin of the best are
    /// tied; the lowest column index wins.
    pub tie_tolerance: f64,
}

impl Default for StepwiseConfig {
    fn default() -> Self {
        StepwiseConfig {
            data_dir: "N/A".into(),
            identify_strategy: IdentifyStrategy::SpecifiedTarget,
            target_index: 0,
            basis_drop_strategy: DropStrategy::MostInsignificant,
            regression_method: RegressionMethod::Ridge,
            alpha_ridge: 1.0e-5,
            f_criteria: 1.0,
            full_path: false,
            confirmation_tolerance: 0.05,
            precision_floor: 1e-10,
            tie_tolerance: 1e-9,
        }
    }
}

impl StepwiseConfig {
    /// Ridge weight actually used by the fits.
    pub fn alpha(&self) -> f64 {
        match self.regression_method {
            RegressionMethod::Ols => 0.0,
            RegressionMethod::Ridge => self.alpha_ridge,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha_ridge >= 0.0) || !self.alpha_ridge.is_finite() {
            return Err(Error::Config(format!("alpha_ridge must be >= 0, got {}", self.alpha_ridge)));
        }
        if !(self.f_criteria > 0.0) {
            return Err(Error::Config(format!("F_criteria must be > 0, got {}", self.f_criteria)));
        }
        if !(self.precision_floor >= 0.0 && self.tie_tolerance >= 0.0 && self.confirmation_tolerance > 0.0) {
            return Err(Error::Config("tolerances must be non-negative".into()));
        }
        Ok(())
    }
}

const VSI_KEYS: &[&str] = &["data_dir", "identify_strategy", "target_index"];
const SR_KEYS: &[&str] = &[
    "basis_drop_strategy",
    "regression_method",
    "alpha_ridge",
    "F_criteria",
    "full_path",
    "confirmation_tolerance",
    "precision_floor",
    "tie_tolerance",
];

/// Parses the INI configuration; absent keys keep their defaults.
pub fn parse_config(text: &str) -> Result<StepwiseConfig> {
    let ini = Ini::parse(text)?;
    for s in ini.section_names() {
        if s != "VSI" && s != "StepwiseRegression" && !(s.is_empty() && ini.entries("").is_empty()) {
            return Err(Error::Config(format!("unknown section [{s}]")));
        }
    }
    config_from_ini(&ini)
}

/// Reads the `[VSI]` and `[StepwiseRegression]` sections of a larger file;
/// other sections are ignored.
pub fn config_from_ini(ini: &Ini) -> Result<StepwiseConfig> {
    ini.reject_unknown("VSI", VSI_KEYS)?;
    ini.reject_unknown("StepwiseRegression", SR_KEYS)?;
    let mut c = StepwiseConfig::default();
    if let Some(v) = ini.get_str("VSI", "data_dir") {
        c.data_dir = v.to_string();
    }
    if let Some(e) = ini.get("VSI", "identify_strategy") {
        c.identify_strategy = match e.value.as_str() {
            "specified_target" => IdentifyStrategy::SpecifiedTarget,
            v => return Err(Error::Config(format!("line {}: unknown identify_strategy '{v}'", e.line))),
        };
    }
    if let Some(v) = ini.get_usize("VSI", "target_index")? {
        c.target_index = v;
    }
    let sr = "StepwiseRegression";
    if let Some(e) = ini.get(sr, "basis_drop_strategy") {
        c.basis_drop_strategy = match e.value.as_str() {
            // the second spelling appears in published example files
            "most_insignificant" | "most_inignificant" => DropStrategy::MostInsignificant,
            v => return Err(Error::Config(format!("line {}: unknown basis_drop_strategy '{v}'", e.line))),
        };
    }
    if let Some(e) = ini.get(sr, "regression_method") {
        c.regression_method = match e.value.to_ascii_lowercase().as_str() {
            "ridge" => RegressionMethod::Ridge,
            "ols" => RegressionMethod::Ols,
            v => return Err(Error::Config(format!("line {}: unknown regression_method '{v}'", e.line))),
        };
    }
    if let Some(v) = ini.get_f64(sr, "alpha_ridge")? {
        c.alpha_ridge = v;
    }
    if let Some(v) = ini.get_f64(sr, "F_criteria")? {
        c.f_criteria = v;
    }
    if let Some(v) = ini.get_bool(sr, "full_path")? {
        c.full_path = v;
    }
    if let Some(v) = ini.get_f64(sr, "confirmation_tolerance")? {
        c.confirmation_tolerance = v;
    }
    if let Some(v) = ini.get_f64(sr, "precision_floor")? {
        c.precision_floor = v;
    }
    if let Some(v) = ini.get_f64(sr, "tie_tolerance")? {
        c.tie_tolerance = v;
    }
    c.validate()?;
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXAMPLE: &str = "[VSI]\ndata_dir=N/A\nidentify_strategy= specified_target\ntarget_index= 0\n\n[StepwiseRegression]\nbasis_drop_strategy = most_inignificant\nregression_method = ridge\nalpha_ridge = 1.0e-5\nF_criteria=1\n";

    #[test]
    fn published_example_parses() {
        let c = parse_config(EXAMPLE).unwrap();
        assert_eq!(c.alpha_ridge, 1e-5);
        assert_eq!(c.f_criteria, 1.0);
        assert_eq!(c.target_index, 0);
        assert_eq!(c.regression_method, RegressionMethod::Ridge);
        assert_eq!(c.basis_drop_strategy, DropStrategy::MostInsignificant);
        assert_eq!(c.data_dir, "N/A");
    }

    #[test]
    fn empty_is_default() {
        assert_eq!(parse_config("").unwrap(), StepwiseConfig::default());
    }

    #[test]
    fn bad_number_reports_line() {
        let e = parse_config("[StepwiseRegression]\nF_criteria = banana\n").unwrap_err().to_string();
        assert!(e.contains("line 2") && e.contains("F_criteria"), "{e}");
    }

    #[test]
    fn unknown_names_rejected() {
        assert!(parse_config("[Other]\na=1\n").unwrap_err().to_string().contains("Other"));
        assert!(parse_config("[VSI]\nfoo=1\n").unwrap_err().to_string().contains("foo"));
        assert!(parse_config("[StepwiseRegression]\nregression_method = lasso\n").is_err());
        assert!(parse_config("[StepwiseRegression]\nalpha_ridge = -1\n").is_err());
        assert!(parse_config("[StepwiseRegression]\nF_criteria = 0\n").is_err());
    }
}
