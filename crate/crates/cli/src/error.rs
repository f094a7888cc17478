use std::fmt;

/// Failure of a command, carrying its exit code class.
#[derive(Debug)]
pub enum CliError {
    Config(String),
    Numerical(String),
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl From<qcompare::Error> for CliError {
    fn from(e: qcompare::Error) -> Self {
        use qcompare::Error as E;
        match e {
            E::Normalization(..) | E::NotHermitian(..) | E::NotPure(..) | E::Calibration(..) => CliError::Numerical(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Config(format!("i/o: {e}"))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Config(format!("json: {e}"))
    }
}

pub fn config(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

pub fn ensure_finite(what: &str, values: impl IntoIterator<Item = f64>) -> CliResult<()> {
    if values.into_iter().all(f64::is_finite) {
        Ok(())
    } else {
        Err(CliError::Numerical(format!("{what} contains non-finite values")))
    }
}
