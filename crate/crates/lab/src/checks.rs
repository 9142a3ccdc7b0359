//! Registry of named checks with their criterion ids and default thresholds.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// Pass when `measured <= threshold`.
    AtMost,
    /// Pass when `measured >= threshold`.
    AtLeast,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheckDef {
    pub name: &'static str,
    pub criterion: &'static str,
    pub direction: Direction,
    pub default: f64,
}

const fn at_most(name: &'static str, criterion: &'static str, default: f64) -> CheckDef {
    CheckDef { name, criterion, direction: Direction::AtMost, default }
}

const fn at_least(name: &'static str, criterion: &'static str, default: f64) -> CheckDef {
    CheckDef { name, criterion, direction: Direction::AtLeast, default }
}

pub const REGISTRY: &[CheckDef] = &[
    at_most("identities.resolvent", "AC1", 1e-10),
    at_most("identities.greiner", "AC1", 1e-10),
    at_most("identities.yosida", "AC1", 1e-8),
    at_most("identities.vcf", "AC1", 1e-10),
    at_most("dirichlet.order_ratio_deviation", "AC2", 1.0),
    at_most("dirichlet.transfer_at_one_error", "AC2", 2e-3),
    at_most("spectra.free_relative", "AC3", 5e-3),
    at_most("spectra.closed_loop_relative", "AC3", 1e-2),
    at_most("sector.free_sup", "AC4", 1.01),
    at_least("sector.free_samples", "AC4", 200.0),
    at_most("sector.closed_loop_change", "AC4", 0.10),
    at_most("admissibility.m2_change", "AC4", 0.10),
    at_most("admissibility.m3_change", "AC4", 0.10),
    at_most("maxreg.free_exact", "AC5", 1.05),
    at_most("maxreg.closed_loop_change", "AC5", 0.10),
    at_most("perturbed.sweep_change", "AC5", 0.10),
    at_least("example.manufactured_order", "AC6", 1.9),
    at_most("example.yosida_terms_residual", "AC1", 1e-8),
    at_most("kappa.slope_deviation", "AC7", 0.05),
    at_most("kappa.weighted_sup_change", "AC7", 0.10),
    at_most("rbound.singleton_error", "AC8", 1e-6),
    at_most("rbound.resolvent_max_ratio", "AC8", 1.2),
    at_most("rbound.dirichlet_seed_change", "AC8", 0.20),
    at_most("rbound.observation_seed_change", "AC8", 0.20),
    at_most("feedback.at_one_error", "AC9", 0.01),
    at_most("feedback.limit_gap", "AC9", 1e-2),
    at_most("feedback.sup", "AC9", 1e6),
    at_least("nonauto.order", "AC10", 1.9),
    at_most("nonauto.identity", "AC10", 1e-9),
    at_most("nonauto.continuity_slack", "AC10", 1e-8),
    at_most("nonauto.maxreg_change", "AC10", 0.10),
];

pub fn lookup(name: &str) -> Option<&'static CheckDef> {
    REGISTRY.iter().find(|c| c.name == name)
}

/// One evaluated check.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub criterion: &'static str,
    pub direction: Direction,
    pub measured: f64,
    pub threshold: f64,
    pub pass: bool,
}

impl Check {
    pub fn evaluate(def: &'static CheckDef, measured: f64, threshold: f64) -> Self {
        let pass = measured.is_finite()
            && match def.direction {
                Direction::AtMost => measured <= threshold,
                Direction::AtLeast => measured >= threshold,
            };
        Self {
            name: def.name,
            criterion: def.criterion,
            direction: def.direction,
            measured,
            threshold,
            pass,
        }
    }

    /// `[AC4] sector.free_sup measured=... <= ... PASS`.
    pub fn summary_line(&self) -> String {
        let op = match self.direction {
            Direction::AtMost => "<=",
            Direction::AtLeast => ">=",
        };
        format!(
            "[{}] {} measured={:.6e} {} {:.6e} {}",
            self.criterion,
            self.name,
            self.measured,
            op,
            self.threshold,
            if self.pass { "PASS" } else { "FAIL" }
        )
    }
}
