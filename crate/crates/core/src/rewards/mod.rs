//! QA metrics and the accuracy / gain / penalty reward stack.

mod metrics;
mod score;

pub use metrics::{best_metrics, cem, em, f1_score, normalize_answer, MetricScores};
pub use score::{
    accuracy_reward, answer_reward, gain_reward, overall_reward, penalty_reward, recall_reward,
    score_trajectory, score_trajectory_with, EmbeddingMatcher, GoldRecord, RelevanceMatcher,
    RetrievalLog, RetrievalStep, RewardBreakdown, RewardConfig, RewardConfigError, TitleMatch,
    DEFAULT_EMBEDDING_THRESHOLD,
};
