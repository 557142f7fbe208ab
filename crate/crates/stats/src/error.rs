use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    #[error("odds ratio undefined: table has a zero cell ({0})")]
    ZeroCell(String),
    #[error("perfect or quasi-complete separation on column `{0}`")]
    Separation(String),
    #[error("information matrix is singular; design is rank deficient")]
    RankDeficient,
    #[error("need more observations ({n}) than parameters ({k})")]
    TooFewObservations { n: usize, k: usize },
    #[error("outcome has a single class")]
    SingleClass,
    #[error("column `{0}` is constant")]
    ConstantColumn(String),
    #[error("length mismatch: {0}")]
    Dimension(String),
    #[error("lambda grid must be non-empty, positive and strictly decreasing")]
    LambdaGrid,
    #[error("models are not nested: {0}")]
    NotNested(String),
    #[error("probabilities must lie strictly inside (0, 1)")]
    Probability,
    #[error("Hosmer-Lemeshow needs at least 2 groups and as many observations, got {0}")]
    TooFewGroups(usize),
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
}

pub type Result<T> = std::result::Result<T, StatsError>;
