#include "moco/motion.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

namespace moco {

std::array<bool, kNumTracks> family_mask(MotionFamily f) {
    switch (f) {
        case MotionFamily::in_plane:  return {false, false, true, true, true, false};   // rz, tx, ty
        case MotionFamily::out_plane: return {true, true, false, false, false, true};   // rx, ry, tz
        case MotionFamily::mixed:     return {true, true, true, true, true, true};
    }
    return {};
}

void MotionSpline::validate() const {
    if (n_nodes() < 3) throw std::invalid_argument("MotionSpline: need >= 3 nodes");
    for (size_t i = 1; i < node_views.size(); ++i)
        if (!(node_views[i] > node_views[i - 1]))
            throw std::invalid_argument("MotionSpline: node views must be strictly increasing");
    for (const auto& t : tracks)
        if (t.size() != node_views.size())
            throw std::invalid_argument("MotionSpline: track length does not match node count");
}

namespace {

int find_interval(std::span<const double> xs, double x) {
    if (x < xs.front() - 1e-12 || x > xs.back() + 1e-12)
        throw std::out_of_range("spline evaluation outside the node range");
    // clamp the tiny roundoff overhang
    if (x <= xs.front()) return 0;
    if (x >= xs.back()) return static_cast<int>(xs.size()) - 2;
    int i = static_cast<int>(std::upper_bound(xs.begin(), xs.end(), x) - xs.begin()) - 1;
    return std::min(i, static_cast<int>(xs.size()) - 2);
}

double hermite(double x0, double x1, double y0, double y1, double d0, double d1, double x) {
    double h = x1 - x0;
    double t = (x - x0) / h;
    double t2 = t * t, t3 = t2 * t;
    return y0 * (2 * t3 - 3 * t2 + 1) + h * d0 * (t3 - 2 * t2 + t) +
           y1 * (-2 * t3 + 3 * t2) + h * d1 * (t3 - t2);
}

} // namespace

double akima_eval(std::span<const double> xs, std::span<const double> ys, double x) {
    const int n = static_cast<int>(xs.size());
    if (n < 5) throw std::invalid_argument("akima_eval: need >= 5 nodes");
    if (ys.size() != xs.size()) throw std::invalid_argument("akima_eval: xs/ys size mismatch");

    // segment slopes with Akima's two extrapolated differences on each side
    std::vector<double> m(n + 3);
    for (int i = 0; i < n - 1; ++i)
        m[i + 2] = (ys[i + 1] - ys[i]) / (xs[i + 1] - xs[i]);
    m[1] = 2.0 * m[2] - m[3];
    m[0] = 2.0 * m[1] - m[2];
    m[n + 1] = 2.0 * m[n] - m[n - 1];
    m[n + 2] = 2.0 * m[n + 1] - m[n];

    auto slope = [&](int i) {
        // node slope from m[i], m[i+1], m[i+2], m[i+3] (m[i+2] is the segment to the right of node i)
        double w1 = std::abs(m[i + 3] - m[i + 2]);
        double w2 = std::abs(m[i + 1] - m[i]);
        double denom = w1 + w2;
        if (denom <= 1e-12 * (std::abs(m[i + 1]) + std::abs(m[i + 2])) || denom == 0.0)
            return 0.5 * (m[i + 1] + m[i + 2]); // slope-weight tie
        return (w1 * m[i + 1] + w2 * m[i + 2]) / denom;
    };

    int i = find_interval(xs, x);
    return hermite(xs[i], xs[i + 1], ys[i], ys[i + 1], slope(i), slope(i + 1), x);
}

double pchip_eval(std::span<const double> xs, std::span<const double> ys, double x) {
    const int n = static_cast<int>(xs.size());
    if (n < 2) throw std::invalid_argument("pchip_eval: need >= 2 nodes");
    if (ys.size() != xs.size()) throw std::invalid_argument("pchip_eval: xs/ys size mismatch");

    int i = find_interval(xs, x);
    if (n == 2) {
        double m = (ys[1] - ys[0]) / (xs[1] - xs[0]);
        return ys[0] + m * (x - xs[0]);
    }

    auto seg = [&](int k) { return (ys[k + 1] - ys[k]) / (xs[k + 1] - xs[k]); };
    auto interior = [&](int k) {
        // Fritsch-Carlson weighted harmonic mean; zero at local extrema
        double m0 = seg(k - 1), m1 = seg(k);
        if (m0 * m1 <= 0.0) return 0.0;
        double h0 = xs[k] - xs[k - 1], h1 = xs[k + 1] - xs[k];
        double w1 = 2.0 * h1 + h0, w2 = h1 + 2.0 * h0;
        return (w1 + w2) / (w1 / m0 + w2 / m1);
    };
    auto endpoint = [&](double h0, double h1, double m0, double m1) {
        // one-sided three-point estimate with the standard monotonicity clamp
        double d = ((2.0 * h0 + h1) * m0 - h0 * m1) / (h0 + h1);
        if (d * m0 <= 0.0) return 0.0;
        if (m0 * m1 < 0.0 && std::abs(d) > 3.0 * std::abs(m0)) return 3.0 * m0;
        return d;
    };

    auto node_slope = [&](int k) {
        if (k == 0) return endpoint(xs[1] - xs[0], xs[2] - xs[1], seg(0), seg(1));
        if (k == n - 1) return endpoint(xs[n - 1] - xs[n - 2], xs[n - 2] - xs[n - 3], seg(n - 2), seg(n - 3));
        return interior(k);
    };

    return hermite(xs[i], xs[i + 1], ys[i], ys[i + 1], node_slope(i), node_slope(i + 1), x);
}

double spline_eval(SplineKind kind, std::span<const double> xs, std::span<const double> ys, double x) {
    // Akima's end rule needs 5 nodes; fall back to PCHIP below that
    if (kind == SplineKind::akima && xs.size() >= 5) return akima_eval(xs, ys, x);
    return pchip_eval(xs, ys, x);
}

MotionTrajectory sample_motion(const MotionSpline& spline, int n_views) {
    spline.validate();
    if (std::abs(spline.node_views.front()) > 1e-9 ||
        std::abs(spline.node_views.back() - (n_views - 1)) > 1e-9)
        throw std::invalid_argument("sample_motion: nodes must span [0, n_views-1]");
    MotionTrajectory motion;
    motion.reserve(n_views);
    std::array<double, kNumTracks> p{};
    for (int i = 0; i < n_views; ++i) {
        for (int t = 0; t < kNumTracks; ++t)
            p[t] = spline_eval(spline.kind, spline.node_views, spline.tracks[t], static_cast<double>(i));
        motion.push_back(se3_from_params(p[0], p[1], p[2], p[3], p[4], p[5]));
    }
    return motion;
}

std::vector<double> uniform_nodes(int n_nodes, int n_views) {
    if (n_nodes < 2 || n_views < 2) throw std::invalid_argument("uniform_nodes: need >= 2 nodes and views");
    std::vector<double> nodes(n_nodes);
    for (int k = 0; k < n_nodes; ++k)
        nodes[k] = (n_views - 1) * static_cast<double>(k) / (n_nodes - 1);
    return nodes;
}

MotionSpline random_motion(uint64_t seed, Amplitude amplitude, int n_nodes, MotionFamily family, int n_views) {
    if (n_nodes < 5) throw std::invalid_argument("random_motion: need >= 5 nodes for Akima");
    MotionSpline s;
    s.kind = SplineKind::akima;
    s.node_views = uniform_nodes(n_nodes, n_views);
    auto mask = family_mask(family);

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(-1.0, 1.0);
    for (int t = 0; t < kNumTracks; ++t) {
        s.tracks[t].assign(n_nodes, 0.0);
        double amp = (t < 3) ? amplitude.rad : amplitude.mm;
        if (!mask[t]) continue;
        for (int k = 1; k < n_nodes; ++k) // node 0 stays at the reference pose
            s.tracks[t][k] = amp * unit(rng);
    }
    return s;
}

void save_spline_csv(const std::string& path, const MotionSpline& s) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open for writing: " + path);
    f << "# spline " << (s.kind == SplineKind::akima ? "akima" : "pchip") << "\n";
    f << "view,rx,ry,rz,tx,ty,tz\n";
    f.precision(17);
    for (int k = 0; k < s.n_nodes(); ++k) {
        f << s.node_views[k];
        for (int t = 0; t < kNumTracks; ++t) f << "," << s.tracks[t][k];
        f << "\n";
    }
}

MotionSpline load_spline_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open: " + path);
    MotionSpline s;
    std::string line;
    std::getline(f, line);
    {
        std::istringstream hs(line);
        std::string hash, tag, kind;
        hs >> hash >> tag >> kind;
        if (hash != "#" || tag != "spline") throw std::runtime_error("spline csv: bad header in " + path);
        if (kind == "akima") s.kind = SplineKind::akima;
        else if (kind == "pchip") s.kind = SplineKind::pchip;
        else throw std::runtime_error("spline csv: unknown kind '" + kind + "'");
    }
    std::getline(f, line); // column header
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string cell;
        std::getline(ls, cell, ',');
        s.node_views.push_back(std::stod(cell));
        for (int t = 0; t < kNumTracks; ++t) {
            if (!std::getline(ls, cell, ',')) throw std::runtime_error("spline csv: short row in " + path);
            s.tracks[t].push_back(std::stod(cell));
        }
    }
    s.validate();
    return s;
}

} // namespace moco
