#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <stdexcept>
#include <variant>
#include <vector>

#include "gridfreq/stream.hpp"

namespace gridfreq::synth {

/// Modulation signal m(n), dimensionless, evaluated lazily at the signal
/// rate. Knot-based modulations hold one value per second and are
/// upsampled by zero-order hold smoothed with a one-second boxcar, which
/// reduces to linear interpolation between knots.
class Modulation {
  public:
    static Modulation zero() { return Modulation(Zero{}); }
    static Modulation constant(double value) { return Modulation(Constant{value}); }
    static Modulation sine(double freq_hz, double amplitude = 1.0, double phase = 0.0) {
        return Modulation(Sine{freq_hz, amplitude, phase});
    }
    static Modulation knots_1hz(std::vector<double> values) {
        if (values.empty()) throw std::invalid_argument("modulation knots empty");
        return Modulation(Knots{std::move(values)});
    }
    static Modulation raw(std::vector<double> samples) {
        return Modulation(Raw{std::move(samples)});
    }

    double at(std::uint64_t n, double fs) const {
        if (std::holds_alternative<Zero>(v_)) return 0.0;
        if (auto* c = std::get_if<Constant>(&v_)) return c->value;
        if (auto* s = std::get_if<Sine>(&v_)) {
            return s->amplitude *
                   std::cos(2.0 * std::numbers::pi * s->freq * (static_cast<double>(n) / fs) +
                            s->phase);
        }
        if (auto* k = std::get_if<Knots>(&v_)) {
            const double x = static_cast<double>(n) / fs;
            const auto i = static_cast<std::size_t>(x);
            if (i + 1 >= k->values.size()) return k->values.back();
            const double f = x - static_cast<double>(i);
            return k->values[i] + f * (k->values[i + 1] - k->values[i]);
        }
        const auto& r = std::get<Raw>(v_);
        return r.samples.at(n);
    }

    double max_abs() const {
        if (std::holds_alternative<Zero>(v_)) return 0.0;
        if (auto* c = std::get_if<Constant>(&v_)) return std::abs(c->value);
        if (auto* s = std::get_if<Sine>(&v_)) return std::abs(s->amplitude);
        const std::vector<double>* vals = nullptr;
        if (auto* k = std::get_if<Knots>(&v_)) vals = &k->values;
        if (auto* r = std::get_if<Raw>(&v_)) vals = &r->samples;
        double m = 0.0;
        for (double x : *vals) m = std::max(m, std::abs(x));
        return m;
    }

    /// Samples covered by this modulation, or nullopt if unbounded.
    std::optional<std::uint64_t> sample_capacity(double fs) const {
        if (auto* k = std::get_if<Knots>(&v_))
            return static_cast<std::uint64_t>(
                (static_cast<double>(k->values.size() - 1)) * fs) + 1;
        if (auto* r = std::get_if<Raw>(&v_)) return r->samples.size();
        return std::nullopt;
    }

  private:
    struct Zero {};
    struct Constant { double value; };
    struct Sine { double freq, amplitude, phase; };
    struct Knots { std::vector<double> values; };
    struct Raw { std::vector<double> samples; };
    using V = std::variant<Zero, Constant, Sine, Knots, Raw>;
    explicit Modulation(V v) : v_(std::move(v)) {}
    V v_;
};

struct Harmonic {
    int order = 2;               // >= 2
    double amplitude = 0.0;      // relative to A_nom, 0..1
};

struct SyntheticSpec {
    double f_nom = 50.0;
    double a_nom = 1.0;
    double fs = 25000.0;
    double d_f = 0.0;            // modulation depth, Hz
    Modulation modulation = Modulation::zero();
    std::uint64_t duration = 0;  // total samples
    std::vector<Harmonic> harmonics;
    std::optional<double> snr_db;  // nullopt = noise free
    std::uint64_t seed = 0;

    void validate() const {
        if (!(f_nom > 0.0) || !(a_nom > 0.0) || !(fs > 0.0) || duration == 0)
            throw std::invalid_argument("invalid-spec: nonpositive base parameters");
        int max_order = 1;
        for (const auto& h : harmonics) {
            if (h.order < 2 || h.amplitude < 0.0 || h.amplitude > 1.0)
                throw std::invalid_argument("invalid-spec: harmonic order/amplitude out of range");
            max_order = std::max(max_order, h.order);
        }
        if (!(fs > 2.0 * f_nom * (max_order + 1)))
            throw std::invalid_argument("invalid-spec: insufficient Nyquist margin");
        if (!(std::abs(d_f) * modulation.max_abs() < f_nom))
            throw std::invalid_argument("invalid-spec: frequency would not stay positive");
        if (auto cap = modulation.sample_capacity(fs); cap && *cap < duration)
            throw std::invalid_argument("invalid-spec: modulation shorter than duration");
    }
};

/// Walks the frequency-modulated phase sample by sample:
///   phi(n) = (n/fs)*2*pi*f_nom + 2*pi*D_f*(1/2)*sum_{theta=1..n}(m(theta-1)+m(theta))/fs
/// The trapezoid sum is accumulated in input order, so any block split of
/// the walk reproduces the single-shot values bit for bit.
class PhaseWalker {
  public:
    explicit PhaseWalker(const SyntheticSpec& spec)
        : spec_(&spec), m_prev_(spec.modulation.at(0, spec.fs)) {}

    std::uint64_t index() const { return n_; }
    double current_modulation() const { return m_prev_; }

    /// Phase of sample n == index(), then advances to n+1.
    double next_phase() {
        const double phase =
            (static_cast<double>(n_) / spec_->fs) * 2.0 * std::numbers::pi * spec_->f_nom +
            2.0 * std::numbers::pi * spec_->d_f * 0.5 * trapezoid_;
        const double m_next = spec_->modulation.at(n_ + 1, spec_->fs);
        trapezoid_ += (m_prev_ + m_next) / spec_->fs;
        m_prev_ = m_next;
        ++n_;
        return phase;
    }

  private:
    const SyntheticSpec* spec_;
    double trapezoid_ = 0.0;
    double m_prev_;
    std::uint64_t n_ = 0;
};

/// Deterministic Gaussian noise source with a fixed per-sample draw order.
class NoiseSource {
  public:
    NoiseSource(double sigma, std::uint64_t seed) : sigma_(sigma), rng_(seed) {}
    double next() { return sigma_ * dist_(rng_); }

  private:
    double sigma_;
    std::mt19937_64 rng_;
    std::normal_distribution<double> dist_{0.0, 1.0};
};

/// Streaming generator for the full synthetic signal (modulated fundamental
/// plus phase-locked harmonics plus optional noise). Block splits of a
/// generation concatenate bit-identically to a single-shot run.
class FmGenerator {
  public:
    explicit FmGenerator(SyntheticSpec spec, bool with_harmonics = true, bool with_noise = true)
        : spec_(validated(std::move(spec))), walker_(spec_), with_harmonics_(with_harmonics) {
        if (with_noise && spec_.snr_db) {
            double p_sig = spec_.a_nom * spec_.a_nom / 2.0;
            if (with_harmonics_)
                for (const auto& h : spec_.harmonics)
                    p_sig += (h.amplitude * spec_.a_nom) * (h.amplitude * spec_.a_nom) / 2.0;
            const double p_noise = p_sig / std::pow(10.0, *spec_.snr_db / 10.0);
            noise_.emplace(std::sqrt(p_noise), spec_.seed);
        }
    }

    const SyntheticSpec& spec() const { return spec_; }
    std::uint64_t produced() const { return walker_.index(); }
    std::uint64_t remaining() const { return spec_.duration - walker_.index(); }

    std::vector<double> next_block(std::uint64_t count) {
        count = std::min<std::uint64_t>(count, remaining());
        std::vector<double> out;
        out.reserve(count);
        for (std::uint64_t i = 0; i < count; ++i) {
            const double phase = walker_.next_phase();
            double v = spec_.a_nom * std::sin(phase);
            if (with_harmonics_)
                for (const auto& h : spec_.harmonics)
                    v += h.amplitude * spec_.a_nom * std::sin(h.order * phase);
            if (noise_) v += noise_->next();
            out.push_back(v);
        }
        return out;
    }

    UtcTime block_t0(const UtcTime& stream_t0) const {
        return stream_t0.plus(static_cast<double>(produced()) / spec_.fs);
    }

  private:
    static SyntheticSpec validated(SyntheticSpec s) {
        s.validate();
        return s;
    }

    SyntheticSpec spec_;
    PhaseWalker walker_;
    bool with_harmonics_;
    std::optional<NoiseSource> noise_;
};

/// Bare frequency-modulated sine, no harmonics or noise.
inline SampleStream make_fm_signal(const SyntheticSpec& spec,
                                   UtcTime t0 = {}) {
    FmGenerator gen(spec, /*with_harmonics=*/false, /*with_noise=*/false);
    return SampleStream{gen.next_block(spec.duration), spec.fs, t0};
}

/// Full signal per spec (harmonics and noise included when present).
inline SampleStream make_test_signal(const SyntheticSpec& spec, UtcTime t0 = {}) {
    FmGenerator gen(spec);
    return SampleStream{gen.next_block(spec.duration), spec.fs, t0};
}

inline double instantaneous_frequency(const SyntheticSpec& spec, std::uint64_t n) {
    if (n >= spec.duration)
        throw std::out_of_range("instantaneous_frequency: sample index out of range");
    return spec.f_nom + spec.d_f * spec.modulation.at(n, spec.fs);
}

/// True one-second average over samples kN+1 .. (k+1)N, N = fs (integer).
/// This is the oracle the zero-crossing estimates are judged against.
inline double true_second_average(const SyntheticSpec& spec, std::uint64_t k) {
    const double n_per_sec = spec.fs;
    if (n_per_sec != std::floor(n_per_sec))
        throw std::invalid_argument("true_second_average: fs must be an integer");
    const auto N = static_cast<std::uint64_t>(n_per_sec);
    if ((k + 1) * N + 1 > spec.duration)
        throw std::invalid_argument("true_second_average: second not fully covered");
    double acc = 0.0;
    for (std::uint64_t n = k * N + 1; n <= (k + 1) * N; ++n)
        acc += spec.modulation.at(n, spec.fs);
    return spec.f_nom + spec.d_f * acc / static_cast<double>(N);
}

/// Adds phase-locked harmonics of the modulated fundamental to a stream
/// that was generated from the same spec.
inline SampleStream add_harmonics(const SampleStream& stream, const SyntheticSpec& spec) {
    spec.validate();  // rejects harmonics beyond the Nyquist margin
    if (stream.samples.size() != spec.duration)
        throw std::invalid_argument("add_harmonics: stream does not match spec duration");
    if (spec.harmonics.empty()) return stream;
    SampleStream out = stream;
    PhaseWalker walker(spec);
    for (double& v : out.samples) {
        const double phase = walker.next_phase();
        for (const auto& h : spec.harmonics)
            v += h.amplitude * spec.a_nom * std::sin(h.order * phase);
    }
    return out;
}

/// Additive white Gaussian noise at the commanded SNR relative to the
/// measured stream power. Deterministic for a given seed.
inline SampleStream add_awgn(const SampleStream& stream, double snr_db, std::uint64_t seed) {
    if (!std::isfinite(snr_db)) return stream;
    double p_sig = 0.0;
    for (double v : stream.samples) p_sig += v * v;
    p_sig /= static_cast<double>(stream.samples.size());
    SampleStream out = stream;
    NoiseSource noise(std::sqrt(p_sig / std::pow(10.0, snr_db / 10.0)), seed);
    for (double& v : out.samples) v += noise.next();
    return out;
}

/// Signal to noise and distortion: fundamental power over everything else.
/// The fundamental is extracted with a four-parameter sine fit seeded at
/// f_nom (frequency refined by Gauss-Newton), so harmonics and noise land
/// in the residual.
inline double measure_sinad(const SampleStream& stream, double f_nom) {
    const std::size_t n = stream.samples.size();
    if (static_cast<double>(n) < stream.fs)
        throw std::invalid_argument("measure_sinad: stream shorter than one second");
    const double* x = stream.samples.data();
    const double fs = stream.fs;

    double w = 2.0 * std::numbers::pi * f_nom / fs;  // rad per sample
    double A = 0.0, B = 0.0, C = 0.0;
    for (int iter = 0; iter < 8; ++iter) {
        // Normal equations for [A sin + B cos + C (+ dw on later passes)].
        const bool fit_w = iter > 0;
        double m[4][4] = {};
        double rhs[4] = {};
        const int dim = fit_w ? 4 : 3;
        for (std::size_t i = 0; i < n; ++i) {
            const double t = w * static_cast<double>(i);
            const double s = std::sin(t), c = std::cos(t);
            double j[4] = {s, c, 1.0, static_cast<double>(i) * (A * c - B * s)};
            for (int r = 0; r < dim; ++r) {
                for (int q = r; q < dim; ++q) m[r][q] += j[r] * j[q];
                rhs[r] += j[r] * x[i];
            }
        }
        for (int r = 0; r < dim; ++r)
            for (int q = 0; q < r; ++q) m[r][q] = m[q][r];
        if (fit_w) {
            // Solve against the residual of the current (A,B,C,w).
            rhs[0] -= m[0][0] * A + m[0][1] * B + m[0][2] * C;
            rhs[1] -= m[1][0] * A + m[1][1] * B + m[1][2] * C;
            rhs[2] -= m[2][0] * A + m[2][1] * B + m[2][2] * C;
            rhs[3] -= m[3][0] * A + m[3][1] * B + m[3][2] * C;
        }
        // Gaussian elimination with partial pivoting.
        double sol[4] = {};
        {
            double a[4][5];
            for (int r = 0; r < dim; ++r) {
                for (int q = 0; q < dim; ++q) a[r][q] = m[r][q];
                a[r][dim] = rhs[r];
            }
            for (int col = 0; col < dim; ++col) {
                int piv = col;
                for (int r = col + 1; r < dim; ++r)
                    if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
                for (int q = 0; q <= dim; ++q) std::swap(a[col][q], a[piv][q]);
                if (a[col][col] == 0.0) throw std::runtime_error("measure_sinad: singular fit");
                for (int r = col + 1; r < dim; ++r) {
                    const double f = a[r][col] / a[col][col];
                    for (int q = col; q <= dim; ++q) a[r][q] -= f * a[col][q];
                }
            }
            for (int r = dim - 1; r >= 0; --r) {
                double acc = a[r][dim];
                for (int q = r + 1; q < dim; ++q) acc -= a[r][q] * sol[q];
                sol[r] = acc / a[r][r];
            }
        }
        if (!fit_w) {
            A = sol[0];
            B = sol[1];
            C = sol[2];
        } else {
            A += sol[0];
            B += sol[1];
            C += sol[2];
            const double dw = sol[3];
            w += std::clamp(dw, -0.1 * w, 0.1 * w);
            if (std::abs(dw) < 1e-14 * w) break;
        }
    }

    double rss = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double t = w * static_cast<double>(i);
        const double r = x[i] - (A * std::sin(t) + B * std::cos(t) + C);
        rss += r * r;
    }
    const double p_fund = (A * A + B * B) / 2.0;
    const double p_rest = rss / static_cast<double>(n);
    if (p_rest <= 0.0) return 300.0;  // numerically perfect sine
    return 10.0 * std::log10(p_fund / p_rest);
}

inline double rms(const std::vector<double>& v) {
    double acc = 0.0;
    for (double x : v) acc += x * x;
    return std::sqrt(acc / static_cast<double>(v.size()));
}

/// Scales a trajectory to a target RMS (used to calibrate modulation depth).
inline std::vector<double> scale_to_rms(std::vector<double> v, double target_rms) {
    const double r = rms(v);
    if (r == 0.0) throw std::invalid_argument("scale_to_rms: zero trajectory");
    for (double& x : v) x *= target_rms / r;
    return v;
}

/// Synthetic grid-like frequency trajectory at 1 Hz: AR(1) with the given
/// correlation time, scaled to the target RMS. Power concentrates at low
/// frequencies, which matches recorded grid deviations reasonably well.
inline std::vector<double> make_ar1_trajectory(std::size_t seconds, double tau_s,
                                               double target_rms, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    const double rho = std::exp(-1.0 / tau_s);
    const double drive = std::sqrt(1.0 - rho * rho);
    std::vector<double> v(seconds);
    double state = g(rng);
    for (std::size_t i = 0; i < seconds; ++i) {
        v[i] = state;
        state = rho * state + drive * g(rng);
    }
    return scale_to_rms(std::move(v), target_rms);
}

}  // namespace gridfreq::synth
