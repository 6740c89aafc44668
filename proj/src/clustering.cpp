#include "jitcast/clustering.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <stdexcept>

#include "jitcast/date.hpp"
#include "jitcast/rng.hpp"

namespace jitcast::cluster {

namespace {

constexpr std::size_t kWeekBegin = 1;
constexpr std::size_t kMonthBegin = 8;

double sq_dist(std::span<const double> a, std::span<const double> b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        acc += d * d;
    }
    return acc;
}

int nearest(std::span<const double> p, const Tensor& centroids) {
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < centroids.rows(); ++c) {
        const double d = sq_dist(p, centroids.row_span(c));
        if (d < best_d) {
            best_d = d;
            best = static_cast<int>(c);
        }
    }
    return best;
}

}  // namespace

ProfileBuild build_profile_vectors(std::span<const data::DailySeries> series, std::size_t min_days) {
    ProfileBuild out;
    for (const auto& s : series) {
        if (s.values.size() < min_days) {
            out.skipped.push_back(s.customer_id);
            continue;
        }
        ProfileVector pv;
        pv.customer_id = s.customer_id;
        std::array<double, 7> dow_sum{}, dow_n{};
        std::array<double, 12> mon_sum{}, mon_n{};
        double total = 0.0;
        for (std::size_t i = 0; i < s.values.size(); ++i) {
            const Date d = s.start_date + std::chrono::days{static_cast<int>(i)};
            const double v = s.values[i];
            total += v;
            dow_sum[day_of_week(d)] += v;
            dow_n[day_of_week(d)] += 1;
            mon_sum[month_of(d) - 1] += v;
            mon_n[month_of(d) - 1] += 1;
        }
        const double level = total / static_cast<double>(s.values.size());
        pv.features[0] = level;

        auto fill_block = [&](auto& sums, auto& counts, std::size_t offset) {
            const std::size_t width = sums.size();
            double block_total = 0.0;
            std::size_t observed = 0;
            for (std::size_t i = 0; i < width; ++i) {
                if (counts[i] > 0) {
                    sums[i] /= counts[i];
                    block_total += sums[i];
                    ++observed;
                }
            }
            const double block_mean = observed ? block_total / static_cast<double>(observed) : 0.0;
            for (std::size_t i = 0; i < width; ++i) {
                pv.features[offset + i] =
                    (counts[i] > 0 && block_mean > 0.0) ? sums[i] / block_mean : 1.0;
            }
        };
        fill_block(dow_sum, dow_n, kWeekBegin);
        fill_block(mon_sum, mon_n, kMonthBegin);
        out.profiles.push_back(std::move(pv));
    }
    return out;
}

Tensor profile_matrix(std::span<const ProfileVector> profiles) {
    if (profiles.empty()) throw std::invalid_argument("profile_matrix: no profiles");
    Tensor m = Tensor::matrix(profiles.size(), kProfileDims);
    for (std::size_t r = 0; r < profiles.size(); ++r)
        for (std::size_t c = 0; c < kProfileDims; ++c) m(r, c) = profiles[r].features[c];
    return m;
}

Tensor standardize_blocks(const Tensor& raw) {
    if (raw.cols() != kProfileDims) {
        throw std::invalid_argument("standardize_blocks: expected " + std::to_string(kProfileDims) +
                                    " columns");
    }
    const std::size_t n = raw.rows();
    Tensor out = raw;
    const std::array<std::pair<std::size_t, std::size_t>, 3> blocks{
        {{0, kWeekBegin}, {kWeekBegin, kMonthBegin}, {kMonthBegin, kProfileDims}}};
    for (const auto& [begin, end] : blocks) {
        double pooled = 0.0;
        for (std::size_t c = begin; c < end; ++c) {
            double mean = 0.0;
            for (std::size_t r = 0; r < n; ++r) mean += raw(r, c);
            mean /= static_cast<double>(n);
            for (std::size_t r = 0; r < n; ++r) {
                out(r, c) = raw(r, c) - mean;
                pooled += out(r, c) * out(r, c);
            }
        }
        const double scale = std::sqrt(pooled / static_cast<double>(n));
        if (scale > 0.0) {
            for (std::size_t r = 0; r < n; ++r)
                for (std::size_t c = begin; c < end; ++c) out(r, c) /= scale;
        }
    }
    return out;
}

void assign_serial(const Tensor& points, const Tensor& centroids, std::span<int> labels) {
    for (std::size_t i = 0; i < points.rows(); ++i) labels[i] = nearest(points.row_span(i), centroids);
}

void assign_parallel(const Tensor& points, const Tensor& centroids, std::span<int> labels) {
    const auto n = static_cast<long long>(points.rows());
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < n; ++i) {
        const auto r = static_cast<std::size_t>(i);
        labels[r] = nearest(points.row_span(r), centroids);
    }
}

double inertia(const Tensor& points, const Tensor& centroids, std::span<const int> labels) {
    double total = 0.0;
    for (std::size_t i = 0; i < points.rows(); ++i) {
        total += sq_dist(points.row_span(i), centroids.row_span(static_cast<std::size_t>(labels[i])));
    }
    return total;
}

namespace {

Tensor farthest_point_seeds(const Tensor& points, std::size_t k, Rng& rng) {
    const std::size_t n = points.rows(), d = points.cols();
    Tensor centroids = Tensor::matrix(k, d);
    std::vector<double> min_d(n, std::numeric_limits<double>::infinity());
    std::size_t pick = uniform_index(rng, n);
    for (std::size_t c = 0; c < k; ++c) {
        std::copy_n(points.row_span(pick).begin(), d, centroids.row_span(c).begin());
        for (std::size_t i = 0; i < n; ++i)
            min_d[i] = std::min(min_d[i], sq_dist(points.row_span(i), centroids.row_span(c)));
        pick = static_cast<std::size_t>(std::max_element(min_d.begin(), min_d.end()) - min_d.begin());
    }
    return centroids;
}

Tensor seeds_from_indices(const Tensor& points, std::span<const std::size_t> idx) {
    Tensor centroids = Tensor::matrix(idx.size(), points.cols());
    for (std::size_t c = 0; c < idx.size(); ++c)
        std::copy_n(points.row_span(idx[c]).begin(), points.cols(), centroids.row_span(c).begin());
    return centroids;
}

// Number of k-subsets of n points, saturating at limit + 1.
std::size_t subset_count(std::size_t n, std::size_t k, std::size_t limit) {
    long double c = 1;
    for (std::size_t i = 1; i <= k; ++i) {
        c = c * static_cast<long double>(n - k + i) / static_cast<long double>(i);
        if (c > static_cast<long double>(limit)) return limit + 1;
    }
    return static_cast<std::size_t>(std::llround(c));
}

// Advances idx to the next k-subset of {0..n-1} in lexicographic order.
bool next_subset(std::vector<std::size_t>& idx, std::size_t n) {
    const std::size_t k = idx.size();
    for (std::size_t i = k; i-- > 0;) {
        if (idx[i] < n - k + i) {
            ++idx[i];
            for (std::size_t j = i + 1; j < k; ++j) idx[j] = idx[j - 1] + 1;
            return true;
        }
    }
    return false;
}

// Moves the point farthest from its centroid into each empty cluster.
void repair_empty(const Tensor& points, const Tensor& centroids, std::vector<int>& labels,
                  std::size_t k) {
    std::vector<std::size_t> counts(k, 0);
    for (int l : labels) ++counts[static_cast<std::size_t>(l)];
    for (std::size_t c = 0; c < k; ++c) {
        if (counts[c] > 0) continue;
        std::size_t best = 0;
        double best_d = -1.0;
        for (std::size_t i = 0; i < points.rows(); ++i) {
            const auto li = static_cast<std::size_t>(labels[i]);
            if (counts[li] <= 1) continue;
            const double dd = sq_dist(points.row_span(i), centroids.row_span(li));
            if (dd > best_d) {
                best_d = dd;
                best = i;
            }
        }
        --counts[static_cast<std::size_t>(labels[best])];
        labels[best] = static_cast<int>(c);
        counts[c] = 1;
    }
}

Tensor cluster_means(const Tensor& points, std::span<const int> labels, std::size_t k) {
    const std::size_t d = points.cols();
    Tensor sums = Tensor::matrix(k, d);
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < points.rows(); ++i) {
        const auto c = static_cast<std::size_t>(labels[i]);
        ++counts[c];
        for (std::size_t j = 0; j < d; ++j) sums(c, j) += points(i, j);
    }
    for (std::size_t c = 0; c < k; ++c)
        for (std::size_t j = 0; j < d; ++j) sums(c, j) /= static_cast<double>(counts[c]);
    return sums;
}

// Single-point transfers (Hartigan): move a point whenever doing so lowers
// inertia once both affected means are updated. Centroids are kept in sync.
bool transfer_pass(const Tensor& points, Tensor& centroids, std::vector<int>& labels, std::size_t k) {
    const std::size_t n = points.rows(), d = points.cols();
    std::vector<double> counts(k, 0.0);
    for (int l : labels) counts[static_cast<std::size_t>(l)] += 1;
    bool moved = false;
    for (std::size_t i = 0; i < n; ++i) {
        const auto from = static_cast<std::size_t>(labels[i]);
        if (counts[from] <= 1) continue;
        const auto p = points.row_span(i);
        const double removal = counts[from] / (counts[from] - 1) * sq_dist(p, centroids.row_span(from));
        std::size_t best = from;
        double best_cost = removal;
        for (std::size_t c = 0; c < k; ++c) {
            if (c == from) continue;
            const double add = counts[c] / (counts[c] + 1) * sq_dist(p, centroids.row_span(c));
            if (add < best_cost) {
                best_cost = add;
                best = c;
            }
        }
        if (best == from || !(best_cost < removal * (1 - 1e-12))) continue;
        for (std::size_t j = 0; j < d; ++j) {
            centroids(from, j) = (centroids(from, j) * counts[from] - p[j]) / (counts[from] - 1);
            centroids(best, j) = (centroids(best, j) * counts[best] + p[j]) / (counts[best] + 1);
        }
        counts[from] -= 1;
        counts[best] += 1;
        labels[i] = static_cast<int>(best);
        moved = true;
    }
    return moved;
}

ClusterModel lloyd(const Tensor& points, Tensor centroids, const KMeansOptions& opt) {
    const std::size_t n = points.rows();
    ClusterModel m;
    m.k = opt.k;
    m.labels.assign(n, 0);
    std::size_t it = 0;
    for (;;) {
        for (; it < opt.max_iter;) {
            assign_parallel(points, centroids, m.labels);
            repair_empty(points, centroids, m.labels, opt.k);
            Tensor updated = cluster_means(points, m.labels, opt.k);
            double shift = 0.0;
            for (std::size_t c = 0; c < opt.k; ++c)
                shift = std::max(shift, std::sqrt(sq_dist(updated.row_span(c), centroids.row_span(c))));
            centroids = std::move(updated);
            m.inertia_trace.push_back(inertia(points, centroids, m.labels));
            ++it;
            if (shift < opt.tol) break;
        }
        if (!opt.transfer_refine || it >= opt.max_iter) break;
        if (!transfer_pass(points, centroids, m.labels, opt.k)) break;
        centroids = cluster_means(points, m.labels, opt.k);
        m.inertia_trace.push_back(inertia(points, centroids, m.labels));
    }
    m.iterations = it;
    m.centroids = std::move(centroids);
    m.inertia = m.inertia_trace.back();
    return m;
}

}  // namespace

ClusterModel kmeans(const Tensor& points, const KMeansOptions& options) {
    const std::size_t n = points.rows();
    if (options.k == 0) throw std::invalid_argument("kmeans: k must be at least 1");
    if (options.k > n) {
        throw std::invalid_argument("kmeans: k = " + std::to_string(options.k) + " exceeds n = " +
                                    std::to_string(n));
    }
    if (options.n_init == 0 || options.max_iter == 0) {
        throw std::invalid_argument("kmeans: n_init and max_iter must be at least 1");
    }
    ClusterModel best;
    bool have = false;
    auto keep = [&](ClusterModel m) {
        if (!have || m.inertia < best.inertia) {
            best = std::move(m);
            have = true;
        }
    };
    if (subset_count(n, options.k, options.n_init) <= options.n_init) {
        // Few enough distinct seed sets: try each one once.
        std::vector<std::size_t> idx(options.k);
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        do {
            keep(lloyd(points, seeds_from_indices(points, idx), options));
        } while (next_subset(idx, n));
    } else {
        for (std::size_t r = 0; r < options.n_init; ++r) {
            Rng rng(mix_seed(options.seed, r));
            keep(lloyd(points, farthest_point_seeds(points, options.k, rng), options));
        }
    }
    best.seed = options.seed;
    best.n_init = options.n_init;
    return best;
}

std::size_t elbow_select(std::span<const std::pair<std::size_t, double>> curve) {
    if (curve.size() < 3) throw std::invalid_argument("elbow_select: need at least 3 curve points");
    const double x1 = static_cast<double>(curve.front().first), y1 = curve.front().second;
    const double x2 = static_cast<double>(curve.back().first), y2 = curve.back().second;
    const double dx = x2 - x1, dy = y2 - y1;
    const double chord = std::hypot(dx, dy);
    if (chord == 0.0) return curve[1].first;
    std::size_t best_k = curve[1].first;
    double best = -1.0;
    const double tie_tol = 1e-12 * (std::abs(y1) + std::abs(y2) + chord);
    for (std::size_t i = 1; i + 1 < curve.size(); ++i) {
        const double x = static_cast<double>(curve[i].first), y = curve[i].second;
        const double dist = std::abs(dy * x - dx * y + x2 * y1 - y2 * x1) / chord;
        if (dist > best + tie_tol) {
            best = dist;
            best_k = curve[i].first;
        }
    }
    return best_k;
}

ElbowCurve elbow_curve(const Tensor& points, std::size_t k_max, KMeansOptions options) {
    k_max = std::min(k_max, points.rows());
    ElbowCurve curve;
    for (std::size_t k = 1; k <= k_max; ++k) {
        options.k = k;
        curve.points.emplace_back(k, kmeans(points, options).inertia);
    }
    curve.selected_k = elbow_select(curve.points);
    return curve;
}

double adjusted_rand_index(std::span<const int> a, std::span<const int> b) {
    if (a.size() != b.size() || a.empty()) {
        throw std::invalid_argument("adjusted_rand_index: label vectors must be equal and non-empty");
    }
    std::map<std::pair<int, int>, double> table;
    std::map<int, double> rows, cols;
    for (std::size_t i = 0; i < a.size(); ++i) {
        table[{a[i], b[i]}] += 1;
        rows[a[i]] += 1;
        cols[b[i]] += 1;
    }
    auto comb2 = [](double x) { return x * (x - 1) / 2.0; };
    double index = 0, sum_a = 0, sum_b = 0;
    for (const auto& [key, v] : table) index += comb2(v);
    for (const auto& [key, v] : rows) sum_a += comb2(v);
    for (const auto& [key, v] : cols) sum_b += comb2(v);
    const double total = comb2(static_cast<double>(a.size()));
    const double expected = sum_a * sum_b / total;
    const double max_index = 0.5 * (sum_a + sum_b);
    if (max_index == expected) return 1.0;
    return (index - expected) / (max_index - expected);
}

}  // namespace jitcast::cluster
