use crate::error::{Error, Result};
use crate::io::Ini;
use crate::nn::Activation;

/// Settings of the `[ActiveLearning]` section.
#[derive(Debug, Clone, PartialEq)]
pub struct ActiveLearningConfig {
    /// `N_rnds`.
    pub rounds: usize,
    /// Global batch of round 0.
    pub global_initial: usize,
    /// Global batch of later rounds.
    pub global_batch: usize,
    /// Local points per round, split between the convexity and error streams.
    pub local_batch: usize,
    pub convexity_fraction: f64,
    /// Standard deviation of convexity-stream perturbations, as a fraction of
    /// each axis range.
    pub perturbation: f64,
    /// Uniform candidates screened per local-sampling call.
    pub screening_batch: usize,
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub search_grid: Vec<Vec<usize>>,
    pub search_epochs: usize,
    pub validation_fraction: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub lr_decay: f64,
    pub seed: u64,
    /// New points closer than this to existing data are dropped; 0 is off.
    pub dedup_radius: f64,
    /// Evaluate the network on `[η₀, η₁², η₂², η₃²]` (after rescaling) so
    /// that it is exactly even in η₁..η₃.
    pub symmetric_inputs: bool,
    /// Points per axis of the η₀ × η₁ slice.
    pub slice_resolution: usize,
    /// Range-normalised radius defining "inside a well".
    pub well_radius: f64,
}

impl Default for ActiveLearningConfig {
    fn default() -> Self {
        ActiveLearningConfig {
            rounds: 12,
            global_initial: 200,
            global_batch: 50,
            local_batch: 100,
            convexity_fraction: 0.5,
            perturbation: 0.03,
            screening_batch: 500,
            hidden: vec![20, 20],
            activation: Activation::Softplus,
            search_grid: vec![vec![20, 20], vec![32, 32], vec![16, 16, 16]],
            search_epochs: 100,
            validation_fraction: 0.2,
            epochs: 200,
            batch_size: 32,
            learning_rate: 0.01,
            lr_decay: 0.01,
            seed: 0,
            dedup_radius: 0.0,
            symmetric_inputs: true,
            slice_resolution: 41,
            well_radius: 0.15,
        }
    }
}

const KEYS: &[&str] = &[
    "rounds",
    "global_initial",
    "global_batch",
    "local_batch",
    "convexity_fraction",
    "perturbation",
    "screening_batch",
    "hidden",
    "activation",
    "search_grid",
    "search_epochs",
    "validation_fraction",
    "epochs",
    "batch_size",
    "learning_rate",
    "lr_decay",
    "seed",
    "dedup_radius",
    "symmetric_inputs",
    "slice_resolution",
    "well_radius",
];

/// `"20,20; 32,32"` -> `[[20,20],[32,32]]`.
fn parse_grid(s: &str, line: usize) -> Result<Vec<Vec<usize>>> {
    s.split(';')
        .filter(|g| !g.trim().is_empty())
        .map(|g| {
            g.split(',')
                .map(|w| {
                    w.trim()
                        .parse::<usize>()
                        .map_err(|_| Error::Config(format!("line {line}: bad width '{}' in search_grid", w.trim())))
                })
                .collect()
        })
        .collect()
}

impl ActiveLearningConfig {
    pub fn parse(text: &str) -> Result<ActiveLearningConfig> {
        Self::from_ini(&Ini::parse(text)?)
    }

    pub fn from_ini(ini: &Ini) -> Result<ActiveLearningConfig> {
        let s = "ActiveLearning";
        ini.reject_unknown(s, KEYS)?;
        let mut c = ActiveLearningConfig::default();
        macro_rules! take {
            ($field:ident, $getter:ident) => {
                if let Some(v) = ini.$getter(s, stringify!($field))? {
                    c.$field = v;
                }
            };
        }
        take!(rounds, get_usize);
        take!(global_initial, get_usize);
        take!(global_batch, get_usize);
        take!(local_batch, get_usize);
        take!(convexity_fraction, get_f64);
        take!(perturbation, get_f64);
        take!(screening_batch, get_usize);
        take!(hidden, get_usize_list);
        take!(search_epochs, get_usize);
        take!(validation_fraction, get_f64);
        take!(epochs, get_usize);
        take!(batch_size, get_usize);
        take!(learning_rate, get_f64);
        take!(lr_decay, get_f64);
        take!(seed, get_u64);
        take!(dedup_radius, get_f64);
        take!(symmetric_inputs, get_bool);
        take!(slice_resolution, get_usize);
        take!(well_radius, get_f64);
        if let Some(v) = ini.get_str(s, "activation") {
            c.activation = Activation::from_name(v)?;
        }
        if let Some(e) = ini.get(s, "search_grid") {
            c.search_grid = parse_grid(&e.value, e.line)?;
        }
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.into()));
        if self.global_initial == 0 {
            return bad("global_initial must be positive");
        }
        if !(0.0..=1.0).contains(&self.convexity_fraction) {
            return bad("convexity_fraction must lie in [0, 1]");
        }
        if !(0.0 < self.validation_fraction && self.validation_fraction < 1.0) {
            return bad("validation_fraction must lie in (0, 1)");
        }
        if !(self.perturbation >= 0.0 && self.dedup_radius >= 0.0 && self.well_radius > 0.0) {
            return bad("perturbation, dedup_radius and well_radius must be non-negative");
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return bad("hidden widths must be positive");
        }
        if self.search_grid.iter().any(|g| g.is_empty() || g.contains(&0)) {
            return bad("search_grid entries must be non-empty lists of positive widths");
        }
        if self.local_batch > 0 && self.screening_batch == 0 {
            return bad("screening_batch must be positive when local_batch > 0");
        }
        if self.slice_resolution < 2 {
            return bad("slice_resolution must be at least 2");
        }
        if self.batch_size == 0 || !(self.learning_rate > 0.0) || self.lr_decay < 0.0 {
            return bad("batch_size and learning_rate must be positive, lr_decay non-negative");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_keys() {
        let c = ActiveLearningConfig::parse(
            "[ActiveLearning]\nrounds = 3\nsearch_grid = 8,8; 4\nhidden = 10, 10\nactivation = tanh\nseed = 7\n",
        )
        .unwrap();
        assert_eq!(c.rounds, 3);
        assert_eq!(c.search_grid, vec![vec![8, 8], vec![4]]);
        assert_eq!(c.hidden, vec![10, 10]);
        assert_eq!(c.activation, Activation::Tanh);
        assert_eq!(c.seed, 7);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(ActiveLearningConfig::parse("[ActiveLearning]\nround = 3\n").is_err());
        assert!(ActiveLearningConfig::parse("[ActiveLearning]\nsearch_grid = 8,x\n").is_err());
        assert!(ActiveLearningConfig::parse("[ActiveLearning]\nconvexity_fraction = 2\n").is_err());
    }
}
