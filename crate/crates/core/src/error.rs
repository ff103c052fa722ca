use thiserror::Error;

pub type Result<T, E = NclError> = std::result::Result<T, E>;

/// Everything that can go wrong inside the engine.
#[derive(Debug, Error)]
pub enum NclError {
    /// A caller broke a documented precondition (shapes, ranges, empty inputs).
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    /// Activations injected mid-network do not fit the receiving layer.
    #[error("injection error: layer {layer} expects width {expected}, got {actual}")]
    Injection {
        layer: usize,
        expected: usize,
        actual: usize,
    },

    #[error("codec error: {0}")]
    Codec(String),

    #[error("decode error at byte {offset}: {message}")]
    Decode { offset: usize, message: String },

    #[error("event file parse error at byte {offset}: {kind}")]
    Parse { offset: usize, kind: ParseErrorKind },

    #[error("config error: {0}")]
    Config(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<NclError>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ParseErrorKind {
    #[error("bad magic")]
    BadMagic,
    #[error("unexpected end of file")]
    Truncated,
    #[error("event times not sorted")]
    UnsortedTimes,
    #[error("channel {channel} out of range (channel count {channels})")]
    ChannelOverflow { channel: u32, channels: u32 },
    #[error("label {label} out of range (class count {classes})")]
    LabelOverflow { label: u32, classes: u32 },
    #[error("invalid event time")]
    BadTime,
    #[error("trailing bytes after last sample")]
    TrailingBytes,
}

impl NclError {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        NclError::Contract(msg.into())
    }

    pub(crate) fn numeric(msg: impl Into<String>) -> Self {
        NclError::Numeric(msg.into())
    }

    /// Wraps an error with the name of the pipeline stage that produced it.
    pub fn in_stage(self, stage: &'static str) -> Self {
        NclError::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// The innermost error, with stage context peeled off.
    pub fn root(&self) -> &NclError {
        match self {
            NclError::Stage { source, .. } => source.root(),
            other => other,
        }
    }

    /// Process exit code for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self.root() {
            NclError::Config(_) => 2,
            NclError::Parse { .. } | NclError::Decode { .. } | NclError::Io(_) | NclError::Csv(_) => 3,
            NclError::Codec(_) => 3,
            NclError::Numeric(_) => 4,
            NclError::Contract(_) | NclError::Injection { .. } => 1,
            NclError::Stage { .. } => unreachable!(),
        }
    }
}
