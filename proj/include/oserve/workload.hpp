#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "oserve/core.hpp"

namespace oserve::workload {

// Min-max normalization bounds used for clustering distances.
struct Scale {
    double in_min = 0.0;
    double in_max = 1.0;
    double out_min = 0.0;
    double out_max = 1.0;

    bool operator==(const Scale &) const = default;

    double norm_in(double v) const { return in_max > in_min ? (v - in_min) / (in_max - in_min) : 0.0; }
    double norm_out(double v) const {
        return out_max > out_min ? (v - out_min) / (out_max - out_min) : 0.0;
    }
};

struct TypeModel {
    int k = 0;
    std::vector<WorkloadType> centroids;  // type_id == index
    Scale scale;

    bool operator==(const TypeModel &) const = default;
};

struct FitStats {
    int iterations = 0;
    std::vector<double> sse;  // within-cluster SSE per Lloyd iteration
};

// Lloyd's k-means over min-max-normalized (input_len, output_len) with
// k-means++ seeding. Deterministic per seed. Throws TooFewRecords.
TypeModel fit_types(const std::vector<TraceRecord> &records, int k, std::uint64_t seed,
                    FitStats *stats = nullptr);

// Nearest centroid in normalized space; ties go to the lower type id.
int assign_type(const TypeModel &model, const TraceRecord &rec);

struct SpanSeries {
    int span_seconds = kDefaultSpanSeconds;
    std::vector<TraceSpan> spans;  // contiguous span_index values

    bool operator==(const SpanSeries &) const = default;
};

// Count arrivals per (span, type). Gaps between occupied spans are
// zero-filled so indices stay contiguous.
SpanSeries bucketize(std::vector<TraceRecord> records, const TypeModel &model, int span_seconds);

struct Forecast {
    std::vector<double> predicted;  // lambda-hat per type, horizon one span
};

// A predictor maps a per-type window of counts (window[j][t], oldest
// first) to the next span's counts. Implementations must return
// non-negative values.
class Forecaster {
  public:
    virtual ~Forecaster() = default;
    virtual std::vector<double> predict(const std::vector<std::vector<double>> &window) const = 0;
    virtual std::string name() const = 0;
};

// Holt's double exponential smoothing (level + trend), clamped at zero.
class HoltForecaster : public Forecaster {
  public:
    explicit HoltForecaster(double alpha = 0.45, double beta = 0.25) : alpha_(alpha), beta_(beta) {}
    std::vector<double> predict(const std::vector<std::vector<double>> &window) const override;
    std::string name() const override { return "holt"; }

  private:
    double alpha_;
    double beta_;
};

// Naive persistence baseline: next = last observed value.
class LastValueForecaster : public Forecaster {
  public:
    std::vector<double> predict(const std::vector<std::vector<double>> &window) const override;
    std::string name() const override { return "last-value"; }
};

constexpr int kForecastWindow = 50;

// Run the predictor over the trailing window (up to kForecastWindow spans).
Forecast forecast_next(const SpanSeries &series, const Forecaster &predictor,
                       int window = kForecastWindow);

// sqrt(mean((p-a)^2)) / mean(a) * 100 per type, averaged across types.
// Throws DegenerateActuals when a type's actuals have zero mean.
double rrmse(const std::vector<std::vector<double>> &predicted,
             const std::vector<std::vector<double>> &actual);

}  // namespace oserve::workload
