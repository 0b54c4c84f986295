//! Group fairness gaps: per-group confusion counts, directional gaps to the
//! attribute median, Student-t intervals across prompts and net
//! significance counts across models.

mod confusion;
mod gaps;
mod net;
mod report;

pub use confusion::{metric_value, tally, GroupConfusion, GroupKey, Metric, PredictionRecord};
pub use gaps::{gap_with_ci, gaps, harm_direction, t_quantile, Centre, ConfidenceInterval, HarmDirection};
pub use net::{net_count_csv, net_counts, significance_sign, NetCountCell, NET_COUNT_HEADER};
pub use report::{gap_report, AbsentCell, GapOptions, GapReport, GapResult};
