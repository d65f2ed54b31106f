//! Flag groups.
//!
//! Every setting that influences an artifact is an `Option` so flags can be
//! layered over a config file and then over built-in defaults. The same
//! kebab-case names are used on the command line, in TOML config files and in
//! the `settings` object of a run manifest.

use std::path::PathBuf;

use bootband::Method;
use clap::Args;
use serde::{Deserialize, Serialize};

macro_rules! layered {
    ($(#[$sm:meta])* $name:ident { $($(#[$m:meta])* $field:ident : $ty:ty),* $(,)? }) => {
        $(#[$sm])*
        #[derive(Debug, Clone, Default, PartialEq, Args, Serialize, Deserialize)]
        #[serde(rename_all = "kebab-case", default)]
        pub struct $name {
            $(
                $(#[$m])*
                #[arg(long)]
                #[serde(skip_serializing_if = "Option::is_none")]
                pub $field: Option<$ty>,
            )*
        }

        impl $name {
            /// Setting names as they appear in config files and manifests.
            pub const KEYS: &'static [&'static str] = &[$(stringify!($field)),*];

            /// Fills unset fields from `lower`.
            pub fn or(self, lower: Self) -> Self {
                Self { $($field: self.$field.or(lower.$field),)* }
            }
        }
    };
}

layered!(DataArgs {
    /// Price CSV: first column ISO-8601 date, then named numeric columns
    input: PathBuf,
    /// Column holding the closing price [default: Close]
    column: String,
    /// Base seed for all randomness [default: random, printed and recorded]
    seed: u64,
});

impl DataArgs {
    pub fn defaults() -> Self {
        Self {
            input: None,
            column: Some("Close".into()),
            seed: None,
        }
    }
}

layered!(SplitArgs {
    /// Training observations [default: 800/1259 of the series]
    train_len: usize,
    /// Test observations [default: the rest]
    test_len: usize,
});

layered!(MethodArg {
    /// Bootstrap method: nbb, mbb or lbb [default: lbb]
    method: Method,
});

impl MethodArg {
    pub fn defaults() -> Self {
        Self {
            method: Some(Method::Lbb),
        }
    }
}

layered!(BootArgs {
    /// Fixed block length; skips selection where selection applies [default: selected]
    block_len: usize,
    /// LBB locality fraction B, needs floor(n*B) >= 1 [default: 0.1]
    locality: f64,
});

impl BootArgs {
    pub fn defaults() -> Self {
        Self {
            block_len: None,
            locality: Some(bootband::bootstrap::DEFAULT_LOCALITY),
        }
    }
}

layered!(SelectArgs {
    /// Penalty exponent t [default: 2]
    t: f64,
    /// Smallest candidate block length [default: 1]
    lmin: usize,
    /// Largest candidate block length [default: min(50, n/4)]
    lmax: usize,
});

impl SelectArgs {
    pub fn defaults() -> Self {
        Self {
            t: Some(2.0),
            lmin: Some(1),
            lmax: None,
        }
    }
}

layered!(TrainArgs {
    /// LSTM lookback window [default: 5]
    lookback: usize,
    /// Minibatch size [default: 15]
    batch_size: usize,
    /// Training epochs [default: 19]
    epochs: usize,
    /// Dropout rate on the last hidden state [default: 0.2]
    dropout: f64,
    /// L2 coefficient on input and dense kernels [default: 0.0001]
    l2: f64,
    /// Hidden units [default: 32]
    hidden: usize,
    /// Adam learning rate [default: 0.001]
    lr: f64,
    /// Segment length for min-max scaling [default: 200]
    smoothing_window: usize,
});

impl TrainArgs {
    pub fn defaults() -> Self {
        let t = bootband::TrainConfig::default();
        Self {
            lookback: Some(t.lookback),
            batch_size: Some(t.batch_size),
            epochs: Some(t.epochs),
            dropout: Some(t.dropout),
            l2: Some(t.l2_coeff),
            hidden: Some(t.hidden_size),
            lr: Some(t.adam.lr),
            smoothing_window: Some(200),
        }
    }
}

layered!(BandArgs {
    /// Bootstrap replicates M [default: 1000]
    reps: usize,
    /// Miscoverage alpha; the band spans the alpha/2 and 1-alpha/2 quantiles [default: 0.05]
    alpha: f64,
    /// Replicates per candidate length during selection [default: 100]
    select_reps: usize,
    /// Replicates allowed to fail training [default: 0]
    allow_failures: usize,
    /// Also write the M x T replicate forecast matrix [default: false]
    #[arg(num_args = 0..=1, default_missing_value = "true")]
    dump_replicates: bool,
});

impl BandArgs {
    pub fn defaults() -> Self {
        Self {
            reps: Some(1000),
            alpha: Some(0.05),
            select_reps: Some(100),
            allow_failures: Some(0),
            dump_replicates: Some(false),
        }
    }
}

layered!(CountArg {
    /// Replicates to draw [default: 1]
    count: usize,
});

layered!(SelectRepsArg {
    /// Replicates per candidate length [default: 100]
    reps: usize,
});

/// Execution options. They never change artifact contents, so they are not
/// recorded in the manifest.
#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// Output directory [default: out]
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// TOML file of `key = value` settings; flags override it
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Worker threads [default: available parallelism]
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Record wall-clock stage timings in the manifest and report
    #[arg(long)]
    pub timings: bool,
}
