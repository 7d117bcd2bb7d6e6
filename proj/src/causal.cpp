#include "tgiqa/causal.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <set>

#include "tgiqa/error.hpp"
#include "tgiqa/kernels.hpp"
#include "tgiqa/predictability.hpp"
#include "tgiqa/stats.hpp"
#include "tgiqa/tensor_io.hpp"

namespace tgiqa {

Dag::Dag(std::vector<std::string> nodes, std::vector<Edge> edges) : nodes_(std::move(nodes)), edges_(std::move(edges)) {
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        if (nodes_[i].empty()) throw Error(Errc::InvalidArgument, "empty node name");
        if (!index_.emplace(nodes_[i], i).second) throw Error(Errc::InvalidArgument, "duplicate node " + nodes_[i]);
    }
    parents_.resize(nodes_.size());
    children_.resize(nodes_.size());
    std::set<std::pair<std::size_t, std::size_t>> seen;
    for (const auto& [p, c] : edges_) {
        const std::size_t pi = index(p);
        const std::size_t ci = index(c);
        if (pi == ci) throw Error(Errc::CycleDetected, "self-loop on " + p);
        if (!seen.emplace(pi, ci).second) throw Error(Errc::InvalidArgument, "duplicate edge " + p + "->" + c);
        parents_[ci].push_back(pi);
        children_[pi].push_back(ci);
    }
    for (auto& v : parents_) std::sort(v.begin(), v.end());
    for (auto& v : children_) std::sort(v.begin(), v.end());

    std::vector<std::size_t> indegree(nodes_.size());
    for (std::size_t v = 0; v < nodes_.size(); ++v) indegree[v] = parents_[v].size();
    std::set<std::size_t> ready;
    for (std::size_t v = 0; v < nodes_.size(); ++v) {
        if (indegree[v] == 0) ready.insert(v);
    }
    while (!ready.empty()) {
        const std::size_t v = *ready.begin();
        ready.erase(ready.begin());
        topo_.push_back(v);
        for (std::size_t c : children_[v]) {
            if (--indegree[c] == 0) ready.insert(c);
        }
    }
    if (topo_.size() != nodes_.size()) {
        std::string on_cycle;
        for (std::size_t v = 0; v < nodes_.size(); ++v) {
            if (indegree[v] > 0) on_cycle += (on_cycle.empty() ? "" : ",") + nodes_[v];
        }
        throw Error(Errc::CycleDetected, "cycle through {" + on_cycle + "}");
    }
}

bool Dag::has_node(const std::string& name) const { return index_.count(name) > 0; }

bool Dag::has_edge(const std::string& parent, const std::string& child) const {
    if (!has_node(parent) || !has_node(child)) return false;
    const auto& ps = parents_[index(child)];
    return std::binary_search(ps.begin(), ps.end(), index(parent));
}

std::size_t Dag::index(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw Error(Errc::UnknownNode, "unknown node '" + name + "'");
    return it->second;
}

std::vector<std::string> Dag::parent_names(const std::string& name) const {
    std::vector<std::string> out;
    for (std::size_t p : parents_[index(name)]) out.push_back(nodes_[p]);
    return out;
}

Dag Dag::with_edge(const std::string& parent, const std::string& child) const {
    auto e = edges_;
    e.emplace_back(parent, child);
    return Dag(nodes_, std::move(e));
}

Dag Dag::with_node(const std::string& name) const {
    auto n = nodes_;
    n.push_back(name);
    return Dag(std::move(n), edges_);
}

Dag Dag::without_edge(const std::string& parent, const std::string& child) const {
    auto e = edges_;
    const auto it = std::find(e.begin(), e.end(), Edge{parent, child});
    if (it == e.end()) throw Error(Errc::InvalidArgument, "no edge " + parent + "->" + child);
    e.erase(it);
    return Dag(nodes_, std::move(e));
}

bool d_separated(const Dag& dag, std::span<const std::size_t> a, std::span<const std::size_t> b,
                 std::span<const std::size_t> z) {
    const std::size_t n = dag.size();
    std::vector<int> role(n, 0);  // bit 1: a, bit 2: b, bit 4: z
    const auto mark = [&](std::span<const std::size_t> set, int bit) {
        for (std::size_t v : set) {
            if (v >= n) throw Error(Errc::UnknownNode, "node index " + std::to_string(v));
            if (role[v] & ~bit) throw Error(Errc::InvalidArgument, "query sets overlap at " + dag.nodes()[v]);
            role[v] |= bit;
        }
    };
    mark(a, 1);
    mark(b, 2);
    mark(z, 4);

    // Ancestors of z (z included): a collider passes the ball iff it is here.
    std::vector<char> z_ancestor(n, 0);
    std::vector<std::size_t> stack(z.begin(), z.end());
    while (!stack.empty()) {
        const std::size_t v = stack.back();
        stack.pop_back();
        if (z_ancestor[v]) continue;
        z_ancestor[v] = 1;
        for (std::size_t p : dag.parents(v)) stack.push_back(p);
    }

    // State (v, up) arrived from a child, (v, down) arrived from a parent.
    enum : int { kUp = 0, kDown = 1 };
    std::vector<char> visited(2 * n, 0);
    std::deque<std::pair<std::size_t, int>> queue;
    for (std::size_t v : a) queue.emplace_back(v, kUp);
    while (!queue.empty()) {
        const auto [v, dir] = queue.front();
        queue.pop_front();
        if (visited[2 * v + dir]) continue;
        visited[2 * v + dir] = 1;
        const bool observed = role[v] & 4;
        if (!observed && (role[v] & 2)) return false;
        if (dir == kUp) {
            if (observed) continue;
            for (std::size_t p : dag.parents(v)) queue.emplace_back(p, kUp);
            for (std::size_t c : dag.children(v)) queue.emplace_back(c, kDown);
        } else {
            if (!observed) {
                for (std::size_t c : dag.children(v)) queue.emplace_back(c, kDown);
            }
            if (z_ancestor[v]) {
                for (std::size_t p : dag.parents(v)) queue.emplace_back(p, kUp);
            }
        }
    }
    return true;
}

bool d_separated(const Dag& dag, const std::vector<std::string>& a, const std::vector<std::string>& b,
                 const std::vector<std::string>& z) {
    const auto lookup = [&](const std::vector<std::string>& names) {
        std::vector<std::size_t> out;
        for (const auto& s : names) out.push_back(dag.index(s));
        return out;
    };
    const auto ai = lookup(a);
    const auto bi = lookup(b);
    const auto zi = lookup(z);
    return d_separated(dag, ai, bi, zi);
}

std::map<std::string, Dag> builtin_dags() {
    std::map<std::string, Dag> g;
    g["baseline"] = Dag({"A", "X", "Y", "Yhat", "Q", "M"},
                        {{"A", "X"}, {"X", "Y"}, {"X", "Yhat"}, {"X", "Q"}, {"Y", "M"}, {"Yhat", "M"}});
    g["shared_z"] = Dag({"A", "X", "Z", "Y", "Yhat", "Q", "M"},
                        {{"A", "X"}, {"X", "Z"}, {"Z", "Yhat"}, {"Z", "Q"}, {"X", "Y"}, {"Y", "M"}, {"Yhat", "M"}});
    g["strong_tg"] = Dag({"A", "X", "Y", "Yhat", "Q", "M"},
                         {{"A", "X"}, {"X", "Y"}, {"X", "Yhat"}, {"Yhat", "Q"}, {"Y", "M"}, {"Yhat", "M"}});
    // T is the task: a selection node entered by the labels and by the
    // label-set-aware quality score, and conditioned on when a dataset is built.
    g["weak_tg"] = Dag({"A", "X", "Y", "Yhat", "Q", "M", "T"}, {{"A", "X"},
                                                                {"X", "Y"},
                                                                {"X", "Yhat"},
                                                                {"X", "Q"},
                                                                {"Y", "M"},
                                                                {"Yhat", "M"},
                                                                {"Y", "T"},
                                                                {"Q", "T"}});
    g["nr_iqa"] = Dag({"A", "X", "H", "Y", "Yhat", "Q", "M"},
                      {{"A", "X"}, {"X", "Y"}, {"X", "Yhat"}, {"X", "Q"}, {"H", "Q"}, {"Y", "M"}, {"Yhat", "M"}});
    g["fr_iqa"] = Dag({"A", "X0", "X", "H", "Y", "Yhat", "Q", "M"}, {{"A", "X"},
                                                                     {"X0", "X"},
                                                                     {"X0", "Q"},
                                                                     {"X", "Y"},
                                                                     {"X", "Yhat"},
                                                                     {"X", "Q"},
                                                                     {"H", "Q"},
                                                                     {"Y", "M"},
                                                                     {"Yhat", "M"}});
    g["common_corruptions"] = Dag({"C", "S", "X0", "X", "Y", "Yhat", "Q", "M"}, {{"C", "X"},
                                                                                 {"S", "X"},
                                                                                 {"X0", "X"},
                                                                                 {"X", "Y"},
                                                                                 {"X", "Yhat"},
                                                                                 {"X", "Q"},
                                                                                 {"Y", "M"},
                                                                                 {"Yhat", "M"}});
    g["baseline_latents"] = Dag({"A", "X", "Z_Yhat", "Z_Q", "Y", "Yhat", "Q", "M"}, {{"A", "X"},
                                                                                     {"X", "Z_Yhat"},
                                                                                     {"Z_Yhat", "Yhat"},
                                                                                     {"X", "Z_Q"},
                                                                                     {"Z_Q", "Q"},
                                                                                     {"X", "Y"},
                                                                                     {"Y", "M"},
                                                                                     {"Yhat", "M"}});
    return g;
}

std::vector<Claim> builtin_claims() {
    const std::vector<std::string> q{"Q"};
    const std::vector<std::string> m{"M"};
    return {
        {"baseline", q, m, {"X"}, true},
        {"nr_iqa", q, m, {"X"}, true},
        {"fr_iqa", q, m, {"X"}, true},
        {"common_corruptions", q, m, {"X"}, true},
        {"baseline_latents", q, m, {"X"}, true},
        {"shared_z", q, m, {"X"}, false},
        {"strong_tg", q, m, {"X"}, false},
        {"weak_tg", q, m, {"X", "T"}, false},
        // The selection node may also be read as acting only while the dataset
        // is assembled; both readings are printed without asserting either.
        {"weak_tg", q, m, {"X"}, std::nullopt},
        {"weak_tg", q, m, {"X", "Y", "T"}, std::nullopt},
    };
}

bool ClaimReport::all_pass() const {
    return std::all_of(rows.begin(), rows.end(), [](const ClaimResult& r) { return r.pass; });
}

std::size_t ClaimReport::asserted() const {
    return static_cast<std::size_t>(
        std::count_if(rows.begin(), rows.end(), [](const ClaimResult& r) { return r.claim.expected.has_value(); }));
}

ClaimReport verify_claims(const std::vector<Claim>& claims, const std::map<std::string, Dag>& dags) {
    ClaimReport report;
    for (const auto& c : claims) {
        auto it = dags.find(c.dag);
        if (it == dags.end()) throw Error(Errc::InvalidArgument, "no DAG named " + c.dag);
        ClaimResult r;
        r.claim = c;
        r.separated = d_separated(it->second, c.a, c.b, c.z);
        r.pass = !c.expected || *c.expected == r.separated;
        report.rows.push_back(std::move(r));
    }
    return report;
}

ClaimReport verify_claims() { return verify_claims(builtin_claims(), builtin_dags()); }

std::string claim_text(const Claim& claim) {
    const auto join = [](const std::vector<std::string>& v) {
        std::string s;
        for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + v[i];
        return s;
    };
    std::string s = join(claim.a) + " _||_ " + join(claim.b);
    if (!claim.z.empty()) s += " | " + join(claim.z);
    return s;
}

// ---------------------------------------------------------------------------

void validate_scm(const ScmSpec& spec) {
    for (const auto& name : spec.dag.nodes()) {
        auto it = spec.mechanisms.find(name);
        if (it == spec.mechanisms.end()) throw Error(Errc::InvalidArgument, "no mechanism for node " + name);
        if (!it->second.fn) throw Error(Errc::InvalidArgument, "empty mechanism for node " + name);
        std::vector<std::string> declared = it->second.parents;
        std::sort(declared.begin(), declared.end());
        if (std::adjacent_find(declared.begin(), declared.end()) != declared.end()) {
            throw Error(Errc::InvalidArgument, "mechanism for " + name + " repeats a parent");
        }
        auto actual = spec.dag.parent_names(name);
        std::sort(actual.begin(), actual.end());
        if (declared != actual) {
            throw Error(Errc::InvalidArgument, "mechanism arguments for " + name + " differ from its DAG parents");
        }
    }
    for (const auto& [name, size] : spec.mechanisms) {
        if (!spec.dag.has_node(name)) throw Error(Errc::UnknownNode, "mechanism for unknown node " + name);
        (void)size;
    }
    for (const auto& [name, size] : spec.domains) {
        if (!spec.dag.has_node(name)) throw Error(Errc::UnknownNode, "domain for unknown node " + name);
        if (size == 0) throw Error(Errc::InvalidArgument, "empty domain for " + name);
    }
}

std::size_t SampleFrame::column_index(const std::string& name) const {
    auto it = std::find(columns.begin(), columns.end(), name);
    if (it == columns.end()) throw Error(Errc::UnknownNode, "frame has no column '" + name + "'");
    return static_cast<std::size_t>(it - columns.begin());
}

std::vector<double> SampleFrame::column(const std::string& name) const {
    const std::size_t c = column_index(name);
    std::vector<double> out(rows);
    for (std::size_t r = 0; r < rows; ++r) out[r] = at(r, c);
    return out;
}

namespace {

struct CompiledScm {
    std::vector<std::size_t> order;
    std::vector<std::vector<std::size_t>> args;  // column indices in mechanism order
    std::vector<const MechanismFn*> fns;
    std::vector<std::uint64_t> salts;
    std::vector<std::size_t> domain;  // 0 = continuous
    std::vector<std::string> names;
};

CompiledScm compile(const ScmSpec& spec) {
    validate_scm(spec);
    const Dag& dag = spec.dag;
    CompiledScm c;
    c.order = dag.topological_order();
    c.names = dag.nodes();
    c.args.resize(dag.size());
    c.fns.resize(dag.size());
    c.salts.resize(dag.size());
    c.domain.assign(dag.size(), 0);
    for (std::size_t v = 0; v < dag.size(); ++v) {
        const auto& mech = spec.mechanisms.at(dag.nodes()[v]);
        for (const auto& p : mech.parents) c.args[v].push_back(dag.index(p));
        c.fns[v] = &mech.fn;
        c.salts[v] = rng::hash_string(dag.nodes()[v]);
    }
    for (const auto& [name, size] : spec.domains) c.domain[dag.index(name)] = size;
    return c;
}

kernels::RowFiller row_filler(const CompiledScm& c, std::uint64_t seed) {
    const std::uint64_t base = rng::derive(seed, "scm");
    return [&c, base](std::size_t row, std::span<double> out) {
        const std::uint64_t row_key = rng::derive(base, row);
        std::vector<double> parent_values;
        for (std::size_t v : c.order) {
            parent_values.clear();
            for (std::size_t p : c.args[v]) parent_values.push_back(out[p]);
            rng::Stream noise(rng::derive(row_key, c.salts[v]));
            const double value = (*c.fns[v])(parent_values, noise);
            if (c.domain[v] > 0 && !(value >= 0.0 && value < static_cast<double>(c.domain[v]) &&
                                     value == std::floor(value))) {
                throw Error(Errc::InvalidArgument, "node " + c.names[v] + " left its discrete domain at row " +
                                                       std::to_string(row));
            }
            out[v] = value;
        }
    };
}

SampleFrame make_frame(const CompiledScm& c, std::size_t n, std::vector<double> data) {
    SampleFrame f;
    f.columns = c.names;
    f.rows = n;
    f.data = std::move(data);
    return f;
}

double unit_hash(std::uint64_t salt, double x) {
    return static_cast<double>(rng::derive(salt, static_cast<std::uint64_t>(x)) >> 11) * 0x1.0p-53;
}

constexpr std::size_t kClasses = 10;
constexpr std::size_t kGroups = 10;

std::uint64_t salt(std::string_view name) { return rng::hash_string(name); }

double class_of(double x) {
    return static_cast<double>(rng::derive(salt("class"), static_cast<std::uint64_t>(x)) % kClasses);
}

double wrong_class(double truth, rng::Stream& noise) {
    return static_cast<double>((static_cast<std::uint64_t>(truth) + 1 + noise.below(kClasses - 1)) % kClasses);
}

double logistic(double s) { return 1.0 / (1.0 + std::exp(-s)); }

Mechanism stratum_x() {
    return {{"A"}, [](std::span<const double> p, rng::Stream& noise) {
                return p[0] * static_cast<double>(kSimStrata / kGroups) +
                       static_cast<double>(noise.below(kSimStrata / kGroups));
            }};
}

Mechanism root_a() {
    return {{}, [](std::span<const double>, rng::Stream& noise) { return static_cast<double>(noise.below(kGroups)); }};
}

Mechanism label_y() {
    return {{"X"}, [](std::span<const double> p, rng::Stream&) { return class_of(p[0]); }};
}

Mechanism correctness_m() {
    return {{"Y", "Yhat"}, [](std::span<const double> p, rng::Stream&) { return p[0] == p[1] ? 1.0 : 0.0; }};
}

}  // namespace

SampleFrame simulate(const ScmSpec& spec, std::size_t n, std::uint64_t seed) {
    if (n == 0) throw Error(Errc::InvalidArgument, "simulation needs n >= 1");
    const CompiledScm c = compile(spec);
    return make_frame(c, n, kernels::omp::fill_rows(n, c.names.size(), row_filler(c, seed)));
}

SampleFrame simulate_serial(const ScmSpec& spec, std::size_t n, std::uint64_t seed) {
    if (n == 0) throw Error(Errc::InvalidArgument, "simulation needs n >= 1");
    const CompiledScm c = compile(spec);
    return make_frame(c, n, kernels::serial::fill_rows(n, c.names.size(), row_filler(c, seed)));
}

std::map<std::string, ScmSpec> builtin_scms() {
    const auto dags = builtin_dags();
    std::map<std::string, ScmSpec> out;

    ScmSpec base;
    base.dag = dags.at("baseline");
    base.domains = {{"A", kGroups}, {"X", kSimStrata}};
    base.mechanisms["A"] = root_a();
    base.mechanisms["X"] = stratum_x();
    base.mechanisms["Y"] = label_y();
    base.mechanisms["Yhat"] = {{"X"}, [](std::span<const double> p, rng::Stream& noise) {
                                   const double truth = class_of(p[0]);
                                   const double hit = 0.2 + 0.7 * unit_hash(salt("hit-rate"), p[0]);
                                   return noise.bernoulli(hit) ? truth : wrong_class(truth, noise);
                               }};
    base.mechanisms["Q"] = {{"X"}, [](std::span<const double> p, rng::Stream& noise) {
                                return unit_hash(salt("quality"), p[0]) - 0.5 + noise.normal();
                            }};
    base.mechanisms["M"] = correctness_m();
    out["baseline_sim"] = std::move(base);

    // Z packs the content class (integer part) with an evidence strength in
    // (0, 1) (fractional part); the predictor is right with that probability
    // and the quality score reads the same evidence.
    ScmSpec shared;
    shared.dag = dags.at("shared_z");
    shared.domains = {{"A", kGroups}, {"X", kSimStrata}};
    shared.mechanisms["A"] = root_a();
    shared.mechanisms["X"] = stratum_x();
    shared.mechanisms["Y"] = label_y();
    shared.mechanisms["Z"] = {{"X"}, [](std::span<const double> p, rng::Stream& noise) {
                                  const double s = 2.0 * unit_hash(salt("evidence"), p[0]) - 1.0 + 2.0 * noise.normal();
                                  return class_of(p[0]) + std::clamp(logistic(s), 1e-9, 1.0 - 1e-9);
                              }};
    shared.mechanisms["Yhat"] = {{"Z"}, [](std::span<const double> p, rng::Stream& noise) {
                                     const double truth = std::floor(p[0]);
                                     return noise.bernoulli(p[0] - truth) ? truth : wrong_class(truth, noise);
                                 }};
    shared.mechanisms["Q"] = {{"Z"}, [](std::span<const double> p, rng::Stream& noise) {
                                  const double f = p[0] - std::floor(p[0]);
                                  return std::log(f / (1.0 - f)) + 0.5 * noise.normal();
                              }};
    shared.mechanisms["M"] = correctness_m();
    out["shared_z_sim"] = std::move(shared);
    return out;
}

namespace {

std::int64_t stratum_value(double v) {
    if (!(v == std::floor(v)) || std::abs(v) > 9e15) {
        throw Error(Errc::InvalidArgument, "stratum column holds a non-integer value");
    }
    return static_cast<std::int64_t>(v);
}

std::map<std::int64_t, std::vector<std::size_t>> strata_of(const SampleFrame& frame, const std::string& stratum) {
    const std::size_t c = frame.column_index(stratum);
    std::map<std::int64_t, std::vector<std::size_t>> out;
    for (std::size_t r = 0; r < frame.rows; ++r) out[stratum_value(frame.at(r, c))].push_back(r);
    return out;
}

int binary_value(double v) {
    if (v != 0.0 && v != 1.0) throw Error(Errc::InvalidArgument, "outcome column must be 0/1");
    return static_cast<int>(v);
}

double median_of(std::vector<double> v) {
    const std::size_t mid = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
    const double upper = v[mid];
    if (v.size() % 2 == 1) return upper;
    const double lower = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
    return 0.5 * (lower + upper);
}

}  // namespace

AceEstimate ace_estimate(const SampleFrame& frame, const std::string& treatment, const std::string& outcome,
                         const std::string& stratum) {
    if (frame.rows == 0) throw Error(Errc::EmptyInput, "empty frame");
    const auto t = frame.column(treatment);
    const auto y = frame.column(outcome);
    AceEstimate est;
    est.threshold = median_of(t);

    struct Cell {
        double sum_hi = 0.0, sum_lo = 0.0;
        std::size_t n_hi = 0, n_lo = 0;
    };
    std::map<std::int64_t, Cell> cells;
    const std::size_t sc = frame.column_index(stratum);
    for (std::size_t r = 0; r < frame.rows; ++r) {
        Cell& cell = cells[stratum_value(frame.at(r, sc))];
        if (t[r] > est.threshold) {
            cell.sum_hi += y[r];
            ++cell.n_hi;
        } else {
            cell.sum_lo += y[r];
            ++cell.n_lo;
        }
    }
    double weighted = 0.0;
    std::size_t kept_rows = 0;
    for (const auto& [key, cell] : cells) {
        if (cell.n_hi == 0 || cell.n_lo == 0) {
            ++est.strata_dropped;
            continue;
        }
        const double diff = cell.sum_hi / static_cast<double>(cell.n_hi) - cell.sum_lo / static_cast<double>(cell.n_lo);
        weighted += static_cast<double>(cell.n_hi + cell.n_lo) * diff;
        kept_rows += cell.n_hi + cell.n_lo;
        ++est.strata_used;
    }
    if (est.strata_used == 0) throw Error(Errc::NoValidStrata, std::to_string(est.strata_dropped) + " strata dropped");
    est.ace = weighted / static_cast<double>(kept_rows);
    return est;
}

StratumAverage within_stratum_auc(const SampleFrame& frame, const std::string& score, const std::string& outcome,
                                  const std::string& stratum) {
    const auto s = frame.column(score);
    const auto y = frame.column(outcome);
    StratumAverage avg;
    double total = 0.0;
    for (const auto& [key, rows] : strata_of(frame, stratum)) {
        std::vector<double> ss;
        std::vector<int> yy;
        int positives = 0;
        for (std::size_t r : rows) {
            ss.push_back(s[r]);
            yy.push_back(binary_value(y[r]));
            positives += yy.back();
        }
        if (positives == 0 || positives == static_cast<int>(yy.size())) {
            ++avg.strata_skipped;
            continue;
        }
        total += auc(ss, yy);
        ++avg.strata_used;
    }
    if (avg.strata_used == 0) throw Error(Errc::NoValidStrata, "no stratum has both outcome classes");
    avg.value = total / static_cast<double>(avg.strata_used);
    return avg;
}

StratumAverage within_stratum_correlation(const SampleFrame& frame, const std::string& x, const std::string& y,
                                          const std::string& stratum) {
    const auto xs = frame.column(x);
    const auto ys = frame.column(y);
    StratumAverage avg;
    double total = 0.0;
    for (const auto& [key, rows] : strata_of(frame, stratum)) {
        std::vector<double> a;
        std::vector<double> b;
        for (std::size_t r : rows) {
            a.push_back(xs[r]);
            b.push_back(ys[r]);
        }
        try {
            total += pearson(a, b);
            ++avg.strata_used;
        } catch (const Error& e) {
            if (e.code() != Errc::DegenerateInput) throw;
            ++avg.strata_skipped;
        }
    }
    if (avg.strata_used == 0) throw Error(Errc::NoValidStrata, "every stratum is degenerate");
    avg.value = total / static_cast<double>(avg.strata_used);
    return avg;
}

double stratified_permutation_p_value(const SampleFrame& frame, const std::string& a, const std::string& b,
                                      const std::vector<std::string>& z, std::size_t permutations,
                                      std::uint64_t seed) {
    if (frame.rows < 2) throw Error(Errc::DegenerateInput, "need at least 2 rows");
    const auto av = frame.column(a);
    const auto bv = frame.column(b);
    std::vector<std::size_t> zc;
    for (const auto& name : z) zc.push_back(frame.column_index(name));

    std::map<std::vector<std::int64_t>, std::vector<std::size_t>> groups;
    for (std::size_t r = 0; r < frame.rows; ++r) {
        std::vector<std::int64_t> key;
        for (std::size_t c : zc) key.push_back(stratum_value(frame.at(r, c)));
        groups[key].push_back(r);
    }
    std::vector<std::vector<std::size_t>> strata;
    for (auto& [key, rows] : groups) strata.push_back(std::move(rows));

    // Centring a within each stratum makes sum(a_c * b) the pooled covariance.
    std::vector<double> centred(frame.rows);
    for (const auto& rows : strata) {
        double mu = 0.0;
        for (std::size_t r : rows) mu += av[r];
        mu /= static_cast<double>(rows.size());
        for (std::size_t r : rows) centred[r] = av[r] - mu;
    }
    const auto statistic = [&](const std::vector<std::size_t>& perm) {
        double s = 0.0;
        for (std::size_t r = 0; r < frame.rows; ++r) s += centred[r] * bv[perm[r]];
        return s;
    };
    std::vector<std::size_t> identity(frame.rows);
    for (std::size_t r = 0; r < frame.rows; ++r) identity[r] = r;
    const double observed = std::abs(statistic(identity));

    const std::uint64_t key = rng::derive(seed, "stratified-permutation");
    const auto stats = kernels::omp::fill_rows(permutations, 1, [&](std::size_t p, std::span<double> out) {
        std::vector<std::size_t> perm = identity;
        rng::Stream stream(rng::derive(key, p));
        for (const auto& rows : strata) {
            for (std::size_t i = rows.size(); i > 1; --i) {
                std::swap(perm[rows[i - 1]], perm[rows[stream.below(i)]]);
            }
        }
        out[0] = std::abs(statistic(perm));
    });
    std::size_t extreme = 0;
    for (double s : stats) extreme += s >= observed ? 1 : 0;
    return static_cast<double>(1 + extreme) / static_cast<double>(1 + permutations);
}

Dag random_dag(std::size_t n_nodes, double edge_prob, std::uint64_t seed) {
    std::vector<std::string> names;
    for (std::size_t i = 0; i < n_nodes; ++i) names.push_back("V" + std::to_string(i));
    rng::Stream stream(rng::derive(seed, "random-dag"));
    std::vector<std::size_t> order(n_nodes);
    for (std::size_t i = 0; i < n_nodes; ++i) order[i] = i;
    for (std::size_t i = n_nodes; i > 1; --i) std::swap(order[i - 1], order[stream.below(i)]);
    std::vector<Edge> edges;
    for (std::size_t i = 0; i < n_nodes; ++i) {
        for (std::size_t j = i + 1; j < n_nodes; ++j) {
            if (stream.bernoulli(edge_prob)) edges.emplace_back(names[order[i]], names[order[j]]);
        }
    }
    std::sort(edges.begin(), edges.end());
    return Dag(std::move(names), std::move(edges));
}

ScmSpec random_linear_scm(const Dag& dag, const std::vector<std::string>& discrete, std::size_t levels,
                          std::uint64_t seed) {
    if (levels < 2) throw Error(Errc::InvalidArgument, "discrete nodes need at least 2 levels");
    ScmSpec spec;
    spec.dag = dag;
    const std::set<std::string> cut(discrete.begin(), discrete.end());
    for (const auto& name : dag.nodes()) {
        Mechanism mech;
        mech.parents = dag.parent_names(name);
        rng::Stream stream(rng::derive(seed, name));
        std::vector<double> weights;
        for (std::size_t i = 0; i < mech.parents.size(); ++i) {
            const double magnitude = 0.5 + stream.uniform();
            weights.push_back(stream.bernoulli(0.5) ? magnitude : -magnitude);
        }
        const bool is_discrete = cut.count(name) > 0;
        const double k = static_cast<double>(levels);
        mech.fn = [weights, is_discrete, k](std::span<const double> p, rng::Stream& noise) {
            double v = noise.normal();
            for (std::size_t i = 0; i < p.size(); ++i) v += weights[i] * p[i];
            if (!is_discrete) return v;
            return std::min(k - 1.0, std::floor(logistic(v) * k));
        };
        spec.mechanisms[name] = std::move(mech);
        if (is_discrete) spec.domains[name] = levels;
    }
    for (const auto& name : discrete) {
        if (!dag.has_node(name)) throw Error(Errc::UnknownNode, "unknown node '" + name + "'");
    }
    return spec;
}

std::string format_frame_csv(const SampleFrame& frame) {
    std::string out;
    for (std::size_t c = 0; c < frame.columns.size(); ++c) out += (c ? "," : "") + frame.columns[c];
    out += '\n';
    char buf[32];
    for (std::size_t r = 0; r < frame.rows; ++r) {
        for (std::size_t c = 0; c < frame.columns.size(); ++c) {
            std::snprintf(buf, sizeof buf, "%.17g", frame.at(r, c));
            if (c) out += ',';
            out += buf;
        }
        out += '\n';
    }
    return out;
}

void write_frame_csv(const std::filesystem::path& path, const SampleFrame& frame) {
    write_file_text(path, format_frame_csv(frame));
}

}  // namespace tgiqa
