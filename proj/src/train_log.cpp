#include "tradelab/train_log.hpp"

#include <cmath>
#include <fstream>

#include "tradelab/error.hpp"
#include "tradelab/format.hpp"

namespace tradelab {

std::string train_log_to_csv(const std::vector<TrainLogRow>& rows) {
  std::string out = "step,episode_return,policy_loss,value_loss,entropy,kl,alpha,disc_loss\n";
  for (const auto& r : rows) {
    out += std::to_string(r.step);
    for (double v : {r.episode_return, r.policy_loss, r.value_loss, r.entropy, r.kl, r.alpha, r.disc_loss}) {
      out += ',';
      if (!std::isnan(v)) out += format_double(v);
    }
    out += '\n';
  }
  return out;
}

void write_train_log_csv(const std::vector<TrainLogRow>& rows, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(Errc::IoError, "cannot open " + path.string() + " for writing");
  out << train_log_to_csv(rows);
}

}  // namespace tradelab
