#pragma once

#include "navgen/episode.hpp"
#include "navgen/world.hpp"

#include <nlohmann/json.hpp>

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace navgen {

inline constexpr double kDefaultSuccessThreshold = 3.0;

struct NavReport {
  double tl = 0.0;
  double ne = 0.0;
  double sr = 0.0;
  double osr = 0.0;
  double spl = 0.0;
  double gp = 0.0;
};

// Throws ValidationError if the path is empty, does not begin at the episode
// start, or steps between non-adjacent viewpoints.
NavReport nav_metrics(const World& world, const Episode& episode, const std::vector<int>& visited,
                      double threshold = kDefaultSuccessThreshold);

struct GroundingReport {
  double rgs = 0.0;
  double rgspl = 0.0;
};

GroundingReport grounding_metrics(const World& world, const Episode& episode, const std::vector<int>& visited,
                                  int selected_object, double threshold = kDefaultSuccessThreshold);

// Lowercase, collapse whitespace, trim, strip terminal punctuation.
std::string normalize_text(const std::string& text);
std::vector<std::string> text_tokens(const std::string& text);

double em(const std::string& candidate, const std::vector<std::string>& references);
double bleu4(const std::string& candidate, const std::vector<std::string>& references);
double rouge_l(const std::string& candidate, const std::vector<std::string>& references);
double meteor_lite(const std::string& candidate, const std::vector<std::string>& references);

struct CiderItem {
  std::string candidate;
  std::vector<std::string> references;
};
// Plain CIDEr per item; document frequencies come from the references of
// the whole corpus.
std::vector<double> cider(const std::vector<CiderItem>& corpus);

// One evaluated episode; metrics that do not apply are absent.
struct EpisodeRecord {
  std::string episode_id;
  TaskKind kind = TaskKind::Vln;
  std::map<std::string, double> metrics;
  std::string output;
};

struct Summary {
  // kind -> metric -> mean (SR/OSR/SPL/RGS/RGSPL and accuracies in percent)
  std::map<std::string, std::map<std::string, double>> per_kind;
  std::map<std::string, std::size_t> counts;
};

// Throws EmptyReportError on empty input.
Summary aggregate(const std::vector<EpisodeRecord>& records);

std::string summary_table(const Summary& summary);
std::string summary_csv(const Summary& summary);
nlohmann::ordered_json report_json(const Summary& summary, const std::vector<EpisodeRecord>& records);

}  // namespace navgen
