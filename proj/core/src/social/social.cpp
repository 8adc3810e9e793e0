#include "mobtcast/social/social.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "mobtcast/diff/tensor.hpp"

namespace mobtcast::social {
namespace {

CheckinVector from_pois(std::vector<std::int64_t> pois) {
  std::sort(pois.begin(), pois.end());
  CheckinVector v;
  for (auto p : pois) {
    if (!v.counts.empty() && v.counts.back().first == p) {
      ++v.counts.back().second;
    } else {
      v.counts.emplace_back(p, 1);
    }
  }
  return v;
}

double dot(const CheckinVector& a, const CheckinVector& b) {
  double s = 0.0;
  auto i = a.counts.begin();
  auto j = b.counts.begin();
  while (i != a.counts.end() && j != b.counts.end()) {
    if (i->first < j->first) {
      ++i;
    } else if (j->first < i->first) {
      ++j;
    } else {
      s += static_cast<double>(i->second) * static_cast<double>(j->second);
      ++i;
      ++j;
    }
  }
  return s;
}

void sort_lists(NeighborGraph& g) {
  for (auto& list : g.neighbors) {
    std::sort(list.begin(), list.end(), [](const Neighbor& a, const Neighbor& b) {
      return a.similarity != b.similarity ? a.similarity > b.similarity : a.user < b.user;
    });
  }
}

}  // namespace

double CheckinVector::norm() const {
  double s = 0.0;
  for (const auto& [_, c] : counts) s += static_cast<double>(c) * static_cast<double>(c);
  return std::sqrt(s);
}

std::vector<CheckinVector> build_checkin_vectors(const data::CheckInLog& log, double train_frac) {
  std::vector<CheckinVector> out(log.num_users());
  for (std::size_t u = 0; u < log.num_users(); ++u) {
    const auto records = log.user(u);
    const auto k = data::training_segment_length(records.size(), train_frac);
    std::vector<std::int64_t> pois;
    for (std::size_t i = 0; i < k; ++i) pois.push_back(records[i].poi_id);
    out[u] = from_pois(std::move(pois));
  }
  return out;
}

std::vector<CheckinVector> build_checkin_vectors(const data::UserSequences& sequences, double train_frac) {
  std::vector<CheckinVector> out(sequences.users.size());
  for (std::size_t u = 0; u < sequences.users.size(); ++u) {
    const auto& seq = sequences.users[u];
    const auto k = data::training_segment_length(seq.size(), train_frac);
    std::vector<std::int64_t> pois;
    for (std::size_t i = 0; i < k; ++i) pois.push_back(seq[i].poi);
    out[u] = from_pois(std::move(pois));
  }
  return out;
}

double cosine_similarity(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw Error("cosine_similarity: length mismatch");
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ab += a[i] * b[i];
    aa += a[i] * a[i];
    bb += b[i] * b[i];
  }
  if (aa == 0.0 || bb == 0.0) return 0.0;
  return std::clamp(ab / (std::sqrt(aa) * std::sqrt(bb)), 0.0, 1.0);
}

double cosine_similarity(const CheckinVector& a, const CheckinVector& b) {
  const double na = a.norm();
  const double nb = b.norm();
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(dot(a, b) / (na * nb), 0.0, 1.0);
}

std::size_t NeighborGraph::num_edges() const {
  std::size_t n = 0;
  for (const auto& l : neighbors) n += l.size();
  return n / 2;
}

bool NeighborGraph::connected(std::int64_t a, std::int64_t b) const {
  const auto& l = neighbors.at(static_cast<std::size_t>(a));
  return std::any_of(l.begin(), l.end(), [b](const Neighbor& x) { return x.user == b; });
}

NeighborGraph discover_neighbors(const std::vector<CheckinVector>& vectors, double tau) {
  if (!(tau >= 0.0 && tau <= 1.0)) throw Error("discover_neighbors: tau must lie in [0, 1]");
  NeighborGraph g;
  g.tau = tau;
  g.neighbors.resize(vectors.size());

  // Inverted index so only users sharing a POI are compared.
  std::map<std::int64_t, std::vector<std::pair<std::size_t, std::uint32_t>>> index;
  for (std::size_t u = 0; u < vectors.size(); ++u) {
    for (const auto& [p, c] : vectors[u].counts) index[p].emplace_back(u, c);
  }
  std::vector<double> norms(vectors.size());
  for (std::size_t u = 0; u < vectors.size(); ++u) norms[u] = vectors[u].norm();

  std::vector<double> acc(vectors.size(), 0.0);
  std::vector<std::size_t> touched;
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    touched.clear();
    for (const auto& [p, ci] : vectors[i].counts) {
      for (const auto& [j, cj] : index[p]) {
        if (j <= i) continue;
        if (acc[j] == 0.0) touched.push_back(j);
        acc[j] += static_cast<double>(ci) * static_cast<double>(cj);
      }
    }
    for (auto j : touched) {
      const double sim = std::clamp(acc[j] / (norms[i] * norms[j]), 0.0, 1.0);
      acc[j] = 0.0;
      if (sim > tau) {
        g.neighbors[i].push_back({static_cast<std::int64_t>(j), sim});
        g.neighbors[j].push_back({static_cast<std::int64_t>(i), sim});
      }
    }
  }
  sort_lists(g);
  return g;
}

NeighborGraph load_edges(const std::filesystem::path& path, const data::CheckInLog& log,
                         const std::vector<CheckinVector>* vectors) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read edges file " + path.string());
  std::unordered_map<std::string, std::int64_t> ids;
  for (std::size_t u = 0; u < log.num_users(); ++u) ids.emplace(log.user_keys[u], static_cast<std::int64_t>(u));

  NeighborGraph g;
  g.neighbors.resize(log.num_users());
  std::vector<std::pair<std::int64_t, std::int64_t>> edges;
  std::string a;
  std::string b;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ls(line);
    if (!(ls >> a >> b)) continue;
    auto ia = ids.find(a);
    auto ib = ids.find(b);
    if (ia == ids.end() || ib == ids.end() || ia->second == ib->second) continue;
    edges.emplace_back(std::min(ia->second, ib->second), std::max(ia->second, ib->second));
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  for (const auto& [x, y] : edges) {
    const double sim = vectors ? cosine_similarity(vectors->at(static_cast<std::size_t>(x)),
                                                   vectors->at(static_cast<std::size_t>(y)))
                               : 1.0;
    g.neighbors[static_cast<std::size_t>(x)].push_back({y, sim});
    g.neighbors[static_cast<std::size_t>(y)].push_back({x, sim});
  }
  sort_lists(g);
  return g;
}

void export_neighbors(std::ostream& out, const NeighborGraph& graph, const std::vector<std::string>* user_keys) {
  char buf[32];
  auto name = [&](std::int64_t u) {
    return user_keys ? user_keys->at(static_cast<std::size_t>(u)) : std::to_string(u);
  };
  for (std::size_t u = 0; u < graph.neighbors.size(); ++u) {
    for (const auto& nb : graph.neighbors[u]) {
      auto r = std::to_chars(buf, buf + sizeof buf, nb.similarity);
      out << name(static_cast<std::int64_t>(u)) << '\t' << name(nb.user) << '\t' << std::string_view(buf, r.ptr - buf)
          << '\n';
    }
  }
}

NeighborGraph import_neighbors(std::istream& in, std::size_t num_users, double tau,
                               const std::unordered_map<std::string, std::int64_t>* key_to_id) {
  NeighborGraph g;
  g.tau = tau;
  g.neighbors.resize(num_users);
  std::string line;
  std::size_t line_no = 0;
  auto resolve = [&](const std::string& s) -> std::int64_t {
    if (key_to_id) {
      auto it = key_to_id->find(s);
      if (it == key_to_id->end()) throw Error("neighbors file: unknown user '" + s + "'");
      return it->second;
    }
    return std::stoll(s);
  };
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string a, b;
    double sim = 0.0;
    if (!(ls >> a >> b >> sim)) throw Error("neighbors file line " + std::to_string(line_no) + " malformed");
    const auto u = resolve(a);
    const auto v = resolve(b);
    if (u < 0 || static_cast<std::size_t>(u) >= num_users || v < 0 || static_cast<std::size_t>(v) >= num_users) {
      throw Error("neighbors file line " + std::to_string(line_no) + ": user out of range");
    }
    g.neighbors[static_cast<std::size_t>(u)].push_back({v, sim});
  }
  sort_lists(g);
  return g;
}

std::optional<HistorySpan> neighbor_window(const std::vector<data::Visit>& sequence, std::int64_t user,
                                           std::int64_t cutoff, std::size_t n) {
  const auto it = std::upper_bound(sequence.begin(), sequence.end(), cutoff,
                                   [](std::int64_t t, const data::Visit& v) { return t < v.timestamp; });
  const auto end = static_cast<std::size_t>(it - sequence.begin());
  if (n == 0 || end < n) return std::nullopt;
  return HistorySpan{user, end - n, end};
}

std::vector<HistorySpan> select_neighbor_windows(const NeighborGraph& graph, const data::UserSequences& sequences,
                                                 std::int64_t user, std::int64_t cutoff, std::size_t n,
                                                 std::size_t k_max) {
  std::vector<HistorySpan> out;
  const auto& list = graph.neighbors.at(static_cast<std::size_t>(user));
  for (std::size_t k = 0; k < list.size() && k < k_max; ++k) {
    const auto j = list[k].user;
    if (auto span = neighbor_window(sequences.users.at(static_cast<std::size_t>(j)), j, cutoff, n)) {
      out.push_back(*span);
    }
  }
  return out;
}

}  // namespace mobtcast::social
