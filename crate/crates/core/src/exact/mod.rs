//! Exact enumeration: spins, currents and the identities relating them.

pub mod checks;
pub mod currents;
pub mod spins;
pub mod sum;

pub use checks::{
    second_moment_exact, verify_correlation_inequality, verify_representation, verify_switching, CheckLine,
    SecondMomentExact, Tolerance,
};
pub use currents::{current_event_measure, current_partition, CurrentEnumerator, CurrentMode, PairTable, SupportTable};
pub use spins::{spin_expectation, spin_partition, CorrelationTable, SpinEnumeration};
pub use sum::{csum, CompensatedSum};

/// Size limits for exact enumeration.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct EnumBudget {
    /// Free spins in a spin enumeration.
    pub spins: usize,
    /// Bonds (ghost bonds included) in a support table.
    pub bonds: usize,
    /// Product of nonzero support counts when pairing two current systems.
    pub pairs: u64,
}

impl Default for EnumBudget {
    fn default() -> Self {
        EnumBudget {
            spins: 24,
            bonds: 20,
            pairs: 1 << 28,
        }
    }
}
