#include "navgen/metrics.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <iomanip>
#include <set>
#include <sstream>
#include <tuple>
#include <unordered_map>

namespace navgen {

namespace {

double goal_distance(const World& world, const Episode& ep, int v) {
  if (ep.goal_viewpoints.empty()) throw ValidationError("episode has no goal viewpoints");
  double best = world.geodesic(v, ep.goal_viewpoints.front());
  for (int g : ep.goal_viewpoints) best = std::min(best, world.geodesic(v, g));
  return best;
}

double path_weight(double l, double tl) {
  const double p = std::max(tl, l);
  return p > 0.0 ? l / p : 1.0;
}

const std::set<std::string> kPercentMetrics{"sr", "osr", "spl", "rgs", "rgspl", "em", "target_acc", "format_valid",
                                            "free_format_valid", "chance_acc"};

using Ngram = std::vector<std::string>;
using NgramCounts = std::map<Ngram, int>;

NgramCounts ngrams(const std::vector<std::string>& words, int n) {
  NgramCounts out;
  for (std::size_t i = 0; i + static_cast<std::size_t>(n) <= words.size(); ++i) {
    out[Ngram(words.begin() + static_cast<std::ptrdiff_t>(i), words.begin() + static_cast<std::ptrdiff_t>(i) + n)]++;
  }
  return out;
}

std::size_t lcs(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

// Exact-match alignment: maximize matches, then minimize chunks.
struct Alignment {
  int matches = 0;
  int chunks = 0;
};

class Aligner {
 public:
  Aligner(const std::vector<std::string>& c, const std::vector<std::string>& r) : c_(c), r_(r) {}

  Alignment best() { return solve(0, 0, -2); }

 private:
  static bool better(const Alignment& a, const Alignment& b) {
    return a.matches != b.matches ? a.matches > b.matches : a.chunks < b.chunks;
  }

  Alignment solve(std::size_t i, std::uint64_t used, int prev) {
    if (i == c_.size()) return {};
    const auto key = std::make_tuple(i, used, prev);
    if (auto it = memo_.find(key); it != memo_.end()) return it->second;
    Alignment best = solve(i + 1, used, -2);
    for (std::size_t j = 0; j < r_.size(); ++j) {
      if ((used >> j) & 1U || c_[i] != r_[j]) continue;
      Alignment sub = solve(i + 1, used | (std::uint64_t{1} << j), static_cast<int>(j));
      sub.matches += 1;
      if (prev != static_cast<int>(j) - 1) sub.chunks += 1;
      if (better(sub, best)) best = sub;
    }
    memo_.emplace(key, best);
    return best;
  }

  struct KeyHash {
    std::size_t operator()(const std::tuple<std::size_t, std::uint64_t, int>& k) const {
      return std::hash<std::uint64_t>()(std::get<1>(k) * 1315423911ULL ^ (std::get<0>(k) << 7) ^
                                        static_cast<std::uint64_t>(std::get<2>(k) + 2));
    }
  };

  const std::vector<std::string>& c_;
  const std::vector<std::string>& r_;
  std::unordered_map<std::tuple<std::size_t, std::uint64_t, int>, Alignment, KeyHash> memo_;
};

void require_references(const std::vector<std::string>& refs) {
  if (refs.empty()) throw ValidationError("text metric needs at least one reference");
}

}  // namespace

NavReport nav_metrics(const World& world, const Episode& episode, const std::vector<int>& visited, double threshold) {
  if (visited.empty()) throw ValidationError("empty trajectory");
  if (visited.front() != episode.start) throw ValidationError("trajectory does not begin at the episode start");
  NavReport r;
  double best = goal_distance(world, episode, visited.front());
  for (std::size_t i = 1; i < visited.size(); ++i) {
    if (!world.adjacent(visited[i - 1], visited[i])) {
      throw ValidationError("trajectory steps between non-adjacent viewpoints " + std::to_string(visited[i - 1]) +
                            " and " + std::to_string(visited[i]));
    }
    r.tl += world.edge_length(visited[i - 1], visited[i]);
    best = std::min(best, goal_distance(world, episode, visited[i]));
  }
  const double l = goal_distance(world, episode, episode.start);
  r.ne = goal_distance(world, episode, visited.back());
  r.sr = r.ne <= threshold ? 1.0 : 0.0;
  r.osr = best <= threshold ? 1.0 : 0.0;
  r.spl = r.sr * path_weight(l, r.tl);
  r.gp = l - r.ne;
  return r;
}

GroundingReport grounding_metrics(const World& world, const Episode& episode, const std::vector<int>& visited,
                                  int selected_object, double threshold) {
  if (!episode.target_object) throw ValidationError("grounding needs a target object");
  const NavReport nav = nav_metrics(world, episode, visited, threshold);
  const bool hit = visited.back() == episode.target_object->viewpoint &&
                   selected_object == episode.target_object->object_id;
  GroundingReport g;
  g.rgs = (nav.sr > 0.0 && hit) ? 1.0 : 0.0;
  g.rgspl = g.rgs * path_weight(goal_distance(world, episode, episode.start), nav.tl);
  return g;
}

std::string normalize_text(const std::string& text) {
  std::string out;
  bool space = false;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      space = !out.empty();
      continue;
    }
    if (space) out.push_back(' ');
    space = false;
    out.push_back(static_cast<char>(std::tolower(c)));
  }
  while (!out.empty() && (std::ispunct(static_cast<unsigned char>(out.back())) || out.back() == ' ')) out.pop_back();
  return out;
}

std::vector<std::string> text_tokens(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string w; in >> w;) {
    std::transform(w.begin(), w.end(), w.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    out.push_back(w);
  }
  return out;
}

double em(const std::string& candidate, const std::vector<std::string>& references) {
  require_references(references);
  const std::string c = normalize_text(candidate);
  for (const auto& r : references) {
    if (normalize_text(r) == c) return 1.0;
  }
  return 0.0;
}

double bleu4(const std::string& candidate, const std::vector<std::string>& references) {
  require_references(references);
  const auto cand = text_tokens(candidate);
  if (cand.empty()) return 0.0;
  std::vector<std::vector<std::string>> refs;
  for (const auto& r : references) refs.push_back(text_tokens(r));
  double log_sum = 0.0;
  for (int n = 1; n <= 4; ++n) {
    const auto cc = ngrams(cand, n);
    NgramCounts max_ref;
    for (const auto& r : refs) {
      for (const auto& [g, k] : ngrams(r, n)) max_ref[g] = std::max(max_ref[g], k);
    }
    double matched = 0.0;
    double total = 0.0;
    for (const auto& [g, k] : cc) {
      total += k;
      auto it = max_ref.find(g);
      if (it != max_ref.end()) matched += std::min(k, it->second);
    }
    if (n == 1 && matched == 0.0) return 0.0;
    const double p = n == 1 ? matched / total : (matched + 1.0) / (total + 1.0);
    log_sum += std::log(p);
  }
  const double c = static_cast<double>(cand.size());
  double r = static_cast<double>(refs.front().size());
  for (const auto& ref : refs) {
    const double len = static_cast<double>(ref.size());
    if (std::abs(len - c) < std::abs(r - c) || (std::abs(len - c) == std::abs(r - c) && len < r)) r = len;
  }
  const double bp = c < r ? std::exp(1.0 - r / c) : 1.0;
  return bp * std::exp(log_sum / 4.0);
}

double rouge_l(const std::string& candidate, const std::vector<std::string>& references) {
  require_references(references);
  constexpr double beta2 = 1.2 * 1.2;
  const auto cand = text_tokens(candidate);
  double best = 0.0;
  for (const auto& ref : references) {
    const auto r = text_tokens(ref);
    const double l = static_cast<double>(lcs(cand, r));
    if (l == 0.0) continue;
    const double p = l / static_cast<double>(cand.size());
    const double rec = l / static_cast<double>(r.size());
    best = std::max(best, (1.0 + beta2) * p * rec / (rec + beta2 * p));
  }
  return best;
}

double meteor_lite(const std::string& candidate, const std::vector<std::string>& references) {
  require_references(references);
  constexpr double alpha = 0.9, beta = 3.0, gamma = 0.5;
  const auto cand = text_tokens(candidate);
  double best = 0.0;
  for (const auto& ref : references) {
    const auto r = text_tokens(ref);
    if (r.size() > 64) throw ValidationError("reference longer than 64 tokens");
    const Alignment a = Aligner(cand, r).best();
    if (a.matches == 0) continue;
    const double m = a.matches;
    const double p = m / static_cast<double>(cand.size());
    const double rec = m / static_cast<double>(r.size());
    const double fmean = p * rec / (alpha * p + (1.0 - alpha) * rec);
    const double penalty = gamma * std::pow(a.chunks / m, beta);
    best = std::max(best, fmean * (1.0 - penalty));
  }
  return best;
}

std::vector<double> cider(const std::vector<CiderItem>& corpus) {
  constexpr int kMaxN = 4;
  std::map<Ngram, double> df;
  for (const auto& item : corpus) {
    require_references(item.references);
    std::set<Ngram> seen;
    for (const auto& ref : item.references) {
      const auto words = text_tokens(ref);
      for (int n = 1; n <= kMaxN; ++n) {
        for (const auto& [g, k] : ngrams(words, n)) seen.insert(g);
      }
    }
    for (const auto& g : seen) df[g] += 1.0;
  }
  const double log_n = std::log(static_cast<double>(corpus.size()));

  struct Vec {
    std::array<std::map<Ngram, double>, kMaxN> tfidf;
    std::array<double, kMaxN> norm{};
  };
  auto vectorize = [&](const std::string& text) {
    Vec v;
    const auto words = text_tokens(text);
    for (int n = 1; n <= kMaxN; ++n) {
      for (const auto& [g, k] : ngrams(words, n)) {
        auto it = df.find(g);
        const double d = std::log(std::max(1.0, it == df.end() ? 0.0 : it->second));
        const double w = k * (log_n - d);
        v.tfidf[static_cast<std::size_t>(n - 1)][g] = w;
        v.norm[static_cast<std::size_t>(n - 1)] += w * w;
      }
    }
    for (auto& x : v.norm) x = std::sqrt(x);
    return v;
  };

  std::vector<double> scores;
  for (const auto& item : corpus) {
    const Vec hyp = vectorize(item.candidate);
    double total = 0.0;
    for (const auto& ref : item.references) {
      const Vec rv = vectorize(ref);
      double per_n = 0.0;
      for (std::size_t n = 0; n < kMaxN; ++n) {
        double dot = 0.0;
        for (const auto& [g, w] : hyp.tfidf[n]) {
          auto it = rv.tfidf[n].find(g);
          if (it != rv.tfidf[n].end()) dot += w * it->second;
        }
        if (hyp.norm[n] != 0.0 && rv.norm[n] != 0.0) per_n += dot / (hyp.norm[n] * rv.norm[n]);
      }
      total += per_n / kMaxN;
    }
    scores.push_back(10.0 * total / static_cast<double>(item.references.size()));
  }
  return scores;
}

Summary aggregate(const std::vector<EpisodeRecord>& records) {
  if (records.empty()) throw EmptyReportError("no episode records to aggregate");
  Summary s;
  std::map<std::string, std::map<std::string, std::pair<double, std::size_t>>> acc;
  for (const auto& r : records) {
    const std::string kind(to_string(r.kind));
    s.counts[kind]++;
    s.counts["overall"]++;
    for (const auto& [name, value] : r.metrics) {
      for (const auto& group : {kind, std::string("overall")}) {
        auto& slot = acc[group][name];
        slot.first += value;
        slot.second += 1;
      }
    }
  }
  for (const auto& [group, metrics] : acc) {
    for (const auto& [name, sum_count] : metrics) {
      double mean = sum_count.first / static_cast<double>(sum_count.second);
      if (kPercentMetrics.contains(name)) mean *= 100.0;
      s.per_kind[group][name] = mean;
    }
  }
  return s;
}

std::string summary_table(const Summary& summary) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(2);
  for (const auto& [group, metrics] : summary.per_kind) {
    out << group << " (n=" << summary.counts.at(group) << ")\n";
    for (const auto& [name, value] : metrics) out << "  " << std::left << std::setw(19) << name << std::right << std::setw(8) << value << '\n';
  }
  return out.str();
}

std::string summary_csv(const Summary& summary) {
  std::ostringstream out;
  out << "group,metric,value,count\n";
  out << std::setprecision(10);
  for (const auto& [group, metrics] : summary.per_kind) {
    for (const auto& [name, value] : metrics) {
      out << group << ',' << name << ',' << value << ',' << summary.counts.at(group) << '\n';
    }
  }
  return out.str();
}

nlohmann::ordered_json report_json(const Summary& summary, const std::vector<EpisodeRecord>& records) {
  nlohmann::ordered_json doc;
  doc["format"] = "navgen-report";
  doc["version"] = 1;
  auto& sum = doc["summary"];
  sum = nlohmann::ordered_json::object();
  for (const auto& [group, metrics] : summary.per_kind) {
    auto& g = sum[group];
    g["count"] = summary.counts.at(group);
    for (const auto& [name, value] : metrics) g[name] = value;
  }
  auto& rows = doc["episodes"];
  rows = nlohmann::ordered_json::array();
  for (const auto& r : records) {
    nlohmann::ordered_json row;
    row["episode_id"] = r.episode_id;
    row["kind"] = to_string(r.kind);
    row["output"] = r.output;
    for (const auto& [name, value] : r.metrics) row[name] = value;
    rows.push_back(row);
  }
  return doc;
}

}  // namespace navgen
