#pragma once

#include <cstddef>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

namespace tradelab {

inline constexpr double kNotApplicable = std::numeric_limits<double>::quiet_NaN();

/// One diagnostics record per policy update. Fields an algorithm does not
/// produce stay NaN and are written as empty CSV cells.
struct TrainLogRow {
  std::size_t step = 0;
  double episode_return = kNotApplicable;  // mean of episodes finished since the last row
  double policy_loss = kNotApplicable;
  double value_loss = kNotApplicable;
  double entropy = kNotApplicable;
  double kl = kNotApplicable;
  double alpha = kNotApplicable;
  double disc_loss = kNotApplicable;
};

std::string train_log_to_csv(const std::vector<TrainLogRow>& rows);
void write_train_log_csv(const std::vector<TrainLogRow>& rows, const std::filesystem::path& path);

}  // namespace tradelab
