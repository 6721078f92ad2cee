#include "oserve/workload.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <stdexcept>

#include "oserve/errors.hpp"

namespace oserve::workload {

namespace {

double uniform01(std::mt19937_64 &rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

struct Point {
    double in;
    double out;
};

double dist2(const Point &a, const Point &b) {
    double di = a.in - b.in;
    double dout = a.out - b.out;
    return di * di + dout * dout;
}

}  // namespace

TypeModel fit_types(const std::vector<TraceRecord> &records, int k, std::uint64_t seed,
                    FitStats *stats) {
    if (k < 1) throw std::invalid_argument("fit_types: k must be >= 1");
    if (static_cast<int>(records.size()) < k) {
        throw TooFewRecords("fit_types: " + std::to_string(records.size()) + " records for k=" +
                            std::to_string(k));
    }

    TypeModel model;
    model.k = k;
    model.scale.in_min = std::numeric_limits<double>::max();
    model.scale.in_max = std::numeric_limits<double>::lowest();
    model.scale.out_min = std::numeric_limits<double>::max();
    model.scale.out_max = std::numeric_limits<double>::lowest();
    for (const auto &r : records) {
        model.scale.in_min = std::min(model.scale.in_min, static_cast<double>(r.input_len));
        model.scale.in_max = std::max(model.scale.in_max, static_cast<double>(r.input_len));
        model.scale.out_min = std::min(model.scale.out_min, static_cast<double>(r.output_len));
        model.scale.out_max = std::max(model.scale.out_max, static_cast<double>(r.output_len));
    }

    std::vector<Point> pts;
    pts.reserve(records.size());
    for (const auto &r : records) {
        pts.push_back({model.scale.norm_in(r.input_len), model.scale.norm_out(r.output_len)});
    }
    const int n = static_cast<int>(pts.size());

    // k-means++ seeding.
    std::mt19937_64 rng(seed);
    std::vector<Point> centroids;
    centroids.push_back(pts[rng() % n]);
    std::vector<double> d2(n);
    while (static_cast<int>(centroids.size()) < k) {
        double total = 0.0;
        for (int i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::max();
            for (const auto &c : centroids) best = std::min(best, dist2(pts[i], c));
            d2[i] = best;
            total += best;
        }
        if (total <= 0.0) {
            // All points coincide with existing centroids; spread over points.
            centroids.push_back(pts[centroids.size() % n]);
            continue;
        }
        double target = uniform01(rng) * total;
        double acc = 0.0;
        int chosen = n - 1;
        for (int i = 0; i < n; ++i) {
            acc += d2[i];
            if (acc >= target) {
                chosen = i;
                break;
            }
        }
        centroids.push_back(pts[chosen]);
    }

    std::vector<int> owner(n, 0);
    const int kMaxIters = 300;
    const double kTol = 1e-6;
    int iter = 0;
    for (; iter < kMaxIters; ++iter) {
        double sse = 0.0;
        for (int i = 0; i < n; ++i) {
            double best = std::numeric_limits<double>::max();
            int arg = 0;
            for (int c = 0; c < k; ++c) {
                double d = dist2(pts[i], centroids[c]);
                if (d < best) {
                    best = d;
                    arg = c;
                }
            }
            owner[i] = arg;
            sse += best;
        }
        if (stats != nullptr) stats->sse.push_back(sse);

        std::vector<Point> next(k, {0.0, 0.0});
        std::vector<int> count(k, 0);
        for (int i = 0; i < n; ++i) {
            next[owner[i]].in += pts[i].in;
            next[owner[i]].out += pts[i].out;
            ++count[owner[i]];
        }
        double movement = 0.0;
        for (int c = 0; c < k; ++c) {
            if (count[c] == 0) {
                // Re-seed an empty cluster at the farthest point.
                double best = -1.0;
                int arg = 0;
                for (int i = 0; i < n; ++i) {
                    double d = dist2(pts[i], centroids[owner[i]]);
                    if (d > best) {
                        best = d;
                        arg = i;
                    }
                }
                next[c] = pts[arg];
            } else {
                next[c].in /= count[c];
                next[c].out /= count[c];
            }
            movement = std::max(movement, std::sqrt(dist2(next[c], centroids[c])));
        }
        centroids = next;
        if (movement < kTol) {
            ++iter;
            break;
        }
    }
    if (stats != nullptr) stats->iterations = iter;

    model.centroids.reserve(k);
    auto denorm_in = [&](double v) {
        return model.scale.in_min + v * (model.scale.in_max - model.scale.in_min);
    };
    auto denorm_out = [&](double v) {
        return model.scale.out_min + v * (model.scale.out_max - model.scale.out_min);
    };
    for (int c = 0; c < k; ++c) {
        WorkloadType t;
        t.type_id = c;
        t.centroid_in = std::max(1.0, denorm_in(centroids[c].in));
        t.centroid_out = std::max(1.0, denorm_out(centroids[c].out));
        model.centroids.push_back(t);
    }
    return model;
}

int assign_type(const TypeModel &model, const TraceRecord &rec) {
    double in = model.scale.norm_in(rec.input_len);
    double out = model.scale.norm_out(rec.output_len);
    double best = std::numeric_limits<double>::max();
    int arg = 0;
    for (int c = 0; c < model.k; ++c) {
        double di = in - model.scale.norm_in(model.centroids[c].centroid_in);
        double dout = out - model.scale.norm_out(model.centroids[c].centroid_out);
        double d = di * di + dout * dout;
        if (d < best) {
            best = d;
            arg = c;
        }
    }
    return arg;
}

SpanSeries bucketize(std::vector<TraceRecord> records, const TypeModel &model, int span_seconds) {
    if (span_seconds <= 0) throw std::invalid_argument("bucketize: span_seconds must be > 0");
    SpanSeries series;
    series.span_seconds = span_seconds;
    if (records.empty()) return series;
    std::stable_sort(records.begin(), records.end(),
                     [](const TraceRecord &a, const TraceRecord &b) { return a.arrival_ms < b.arrival_ms; });

    const std::uint64_t span_ms = static_cast<std::uint64_t>(span_seconds) * 1000;
    std::int64_t first = static_cast<std::int64_t>(records.front().arrival_ms / span_ms);
    std::int64_t last = static_cast<std::int64_t>(records.back().arrival_ms / span_ms);
    series.spans.resize(last - first + 1);
    for (std::int64_t s = first; s <= last; ++s) {
        series.spans[s - first].span_index = s;
        series.spans[s - first].counts.assign(model.k, 0);
    }
    for (const auto &r : records) {
        std::int64_t s = static_cast<std::int64_t>(r.arrival_ms / span_ms) - first;
        series.spans[s].counts[assign_type(model, r)] += 1;
    }
    return series;
}

std::vector<double> HoltForecaster::predict(const std::vector<std::vector<double>> &window) const {
    std::vector<double> out;
    out.reserve(window.size());
    for (const auto &xs : window) {
        if (xs.empty()) {
            out.push_back(0.0);
            continue;
        }
        double level = xs[0];
        double trend = 0.0;
        for (std::size_t t = 1; t < xs.size(); ++t) {
            double prev_level = level;
            level = alpha_ * xs[t] + (1.0 - alpha_) * (level + trend);
            trend = beta_ * (level - prev_level) + (1.0 - beta_) * trend;
        }
        out.push_back(std::max(0.0, level + trend));
    }
    return out;
}

std::vector<double> LastValueForecaster::predict(const std::vector<std::vector<double>> &window) const {
    std::vector<double> out;
    out.reserve(window.size());
    for (const auto &xs : window) out.push_back(xs.empty() ? 0.0 : std::max(0.0, xs.back()));
    return out;
}

Forecast forecast_next(const SpanSeries &series, const Forecaster &predictor, int window) {
    if (series.spans.empty()) throw std::invalid_argument("forecast_next: empty series");
    const int k = static_cast<int>(series.spans.front().counts.size());
    const int len = static_cast<int>(series.spans.size());
    const int start = std::max(0, len - window);
    std::vector<std::vector<double>> win(k);
    for (int t = start; t < len; ++t) {
        for (int j = 0; j < k; ++j) win[j].push_back(static_cast<double>(series.spans[t].counts[j]));
    }
    Forecast f;
    f.predicted = predictor.predict(win);
    for (double &v : f.predicted) v = std::max(0.0, v);
    return f;
}

double rrmse(const std::vector<std::vector<double>> &predicted,
             const std::vector<std::vector<double>> &actual) {
    if (predicted.size() != actual.size() || predicted.empty()) {
        throw std::invalid_argument("rrmse: series shape mismatch");
    }
    double total = 0.0;
    for (std::size_t j = 0; j < actual.size(); ++j) {
        if (predicted[j].size() != actual[j].size() || actual[j].empty()) {
            throw std::invalid_argument("rrmse: series length mismatch for type " + std::to_string(j));
        }
        double se = 0.0;
        double mean = 0.0;
        for (std::size_t t = 0; t < actual[j].size(); ++t) {
            double d = predicted[j][t] - actual[j][t];
            se += d * d;
            mean += actual[j][t];
        }
        mean /= static_cast<double>(actual[j].size());
        if (mean == 0.0) {
            throw DegenerateActuals("rrmse: type " + std::to_string(j) + " actuals have zero mean");
        }
        total += std::sqrt(se / static_cast<double>(actual[j].size())) / mean * 100.0;
    }
    return total / static_cast<double>(actual.size());
}

}  // namespace oserve::workload
