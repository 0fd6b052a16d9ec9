use std::fmt;

use thiserror::Error;

/// Which convergence condition of a moment generating function failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MgfConstraint {
    /// Geometric series of scans: `e^{θT}(1 − P_s) < 1`.
    Arrival,
    /// Deferral series: `e^{ϖθ}(1 − p) < 1`.
    Deferral,
    /// Retransmission series at the worst admissible channel gain.
    Retransmission,
}

impl fmt::Display for MgfConstraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            MgfConstraint::Arrival => "arrival (scan geometric series)",
            MgfConstraint::Deferral => "service deferral series",
            MgfConstraint::Retransmission => "service retransmission series at h_min",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("config line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("unknown parameter `{0}`")]
    UnknownKey(String),

    #[error("parameter `{field}` = {value} is outside the allowed range {range}")]
    OutOfRange {
        field: &'static str,
        value: f64,
        range: &'static str,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("achievable rate is not positive at SNR {snr}; the acceptance threshold tau is too low")]
    NonPositiveRate { snr: f64 },

    #[error("alpha = 1 leaves no sensing power; detection probability is zero for d > 0")]
    AllPowerToComm,

    #[error("alpha = 0 leaves no communication power")]
    AllPowerToSensing,

    #[error("tau = {tau} gives a non-positive rate; the smallest admissible SNR is {min_snr}")]
    TauTooLow { tau: f64, min_snr: f64 },

    #[error("channel is never acceptable (p = {p_accept})")]
    ChannelNeverAcceptable { p_accept: f64 },

    #[error("MGF diverges at theta = {theta}: {constraint} violated, critical theta = {critical_theta}")]
    MgfDiverges {
        constraint: MgfConstraint,
        theta: f64,
        critical_theta: f64,
    },

    #[error("no feasible alpha: every grid point is unstable or divergent")]
    NoFeasibleAlpha,

    #[error("simulation made no progress: queue length exceeded {0}")]
    NonProgress(usize),

    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;
