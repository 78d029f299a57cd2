use crate::ppo::policy::SampledAction;

/// One stored transition.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub observation: Vec<f64>,
    pub action: SampledAction,
    pub log_prob: f64,
    pub value: f64,
    pub reward: f64,
    pub done: bool,
}

/// Experience buffer in collection order. Episodes are delimited by `done`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trajectory {
    pub records: Vec<TrajectoryRecord>,
    /// Value estimate of the state following the last record, used when the
    /// buffer ends mid-episode. Ignored if the last record is terminal.
    pub bootstrap_value: f64,
}

impl Trajectory {
    pub fn with_capacity(n: usize) -> Self {
        Self {
            records: Vec::with_capacity(n),
            bootstrap_value: 0.0,
        }
    }

    pub fn push(&mut self, record: TrajectoryRecord) {
        self.records.push(record);
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn clear(&mut self) {
        self.records.clear();
        self.bootstrap_value = 0.0;
    }

    pub fn rewards(&self) -> impl Iterator<Item = f64> + '_ {
        self.records.iter().map(|r| r.reward)
    }
}
