#include <cmath>

#include "json.hpp"

#include "percs/eval.hpp"

namespace percs {
namespace {

using Json = nlohmann::ordered_json;

double round6(double v) { return std::round(v * 1e6) / 1e6; }

Json rows(const std::vector<ThresholdMetrics>& metrics) {
  Json out = Json::array();
  for (const auto& m : metrics) {
    out.push_back({{"iou", m.iou_threshold},
                   {"TP", m.tp},
                   {"FP", m.fp},
                   {"FN", m.fn},
                   {"AP", round6(m.ap)},
                   {"P", round6(m.precision)},
                   {"R", round6(m.recall)},
                   {"degenerate", m.degenerate}});
  }
  return out;
}

}  // namespace

std::string metrics_to_json(const MetricsReport& report) {
  Json root;
  Json images = Json::array();
  for (const auto& img : report.per_image) images.push_back({{"id", img.id}, {"thresholds", rows(img.thresholds)}});
  root["per_image"] = std::move(images);
  root["aggregate"] = rows(report.aggregate);
  root["macro_aggregate"] = rows(report.macro_aggregate);
  return root.dump(2) + "\n";
}

}  // namespace percs
