#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <random>

#include "gridfreq/fir.hpp"
#include "testutil.hpp"

using namespace gridfreq;
using Catch::Approx;

namespace {

// Least-squares sin/cos projection at a known frequency over the valid
// region; returns (amplitude, phase).
std::pair<double, double> fit_tone(const std::vector<double>& y, std::size_t lo, std::size_t hi,
                                   double f, double fs) {
    double ss = 0, sc = 0, cc = 0, sy = 0, cy = 0;
    for (std::size_t n = lo; n < hi; ++n) {
        const double t = 2.0 * std::numbers::pi * f * static_cast<double>(n) / fs;
        const double s = std::sin(t), c = std::cos(t);
        ss += s * s;
        sc += s * c;
        cc += c * c;
        sy += s * y[n];
        cy += c * y[n];
    }
    const double det = ss * cc - sc * sc;
    const double a = (cy * ss - sy * sc) / det;  // cos coefficient
    const double b = (sy * cc - cy * sc) / det;  // sin coefficient
    return {std::hypot(a, b), std::atan2(a, b)};
}

double scan_3db_corner(const fir::FirFilter& f) {
    const double target = std::pow(10.0, -3.0 / 20.0);
    for (double freq = 1.0; freq < f.fs / 2; freq += 0.25)
        if (std::abs(fir::frequency_response(f, freq)) <= target) return freq;
    return -1.0;
}

}  // namespace

TEST_CASE("zc prefilter design at 25 kHz / 50 Hz") {
    auto f = fir::design_zc_prefilter(25000.0, 50.0);
    CHECK(f.order() == 100);
    CHECK(f.taps.size() == 101);
    CHECK(f.group_delay() == 50);

    SECTION("tap symmetry is bit-exact") {
        for (std::size_t n = 0; n <= f.order(); ++n) CHECK(f.taps[n] == f.taps[f.order() - n]);
    }
    SECTION("unit DC gain") {
        double sum = 0;
        for (double t : f.taps) sum += t;
        CHECK(sum == Approx(1.0).margin(1e-12));
        auto h0 = fir::frequency_response(f, 0.0);
        CHECK(h0.real() == Approx(1.0).margin(1e-12));
        CHECK(h0.imag() == Approx(0.0).margin(1e-15));
    }
    SECTION("3 dB corner frequency (DTFT scan)") {
        // The Hamming mainlobe of a 101-tap filter dominates the response,
        // which puts the half-power point near 168 Hz for this design.
        const double corner = scan_3db_corner(f);
        CHECK(corner == Approx(167.75).margin(1.0));
    }
    SECTION("stopband") {
        CHECK(std::abs(fir::frequency_response(f, 2000.0)) < 0.01);
        CHECK(fir::magnitude_db(f, 2000.0) < -40.0);
    }
    SECTION("passband at the nominal frequency") {
        const double h50 = std::abs(fir::frequency_response(f, 50.0));
        CHECK(h50 > 0.95);
        CHECK(h50 < 1.05);
    }
}

TEST_CASE("prefilter order scales with fs and f_nom") {
    CHECK(fir::design_zc_prefilter(12800.0, 50.0).order() == 52);
    CHECK(fir::design_zc_prefilter(25000.0, 60.0).order() == 84);
    CHECK_THROWS_AS(fir::design_zc_prefilter(4000.0, 50.0), std::invalid_argument);
}

TEST_CASE("linear phase before compensation") {
    auto f = fir::design_zc_prefilter(25000.0, 50.0);
    for (double freq : {5.0, 20.0, 45.0}) {
        const auto h = fir::frequency_response(f, freq);
        const double expected =
            -2.0 * std::numbers::pi * freq * static_cast<double>(f.group_delay()) / f.fs;
        CHECK(std::arg(h) == Approx(expected).margin(1e-9));
    }
}

TEST_CASE("zero-phase application") {
    auto f = fir::design_zc_prefilter(25000.0, 50.0);

    SECTION("50 Hz tone passes with unity-ish gain and no phase shift") {
        auto in = testutil::constant_sine(50.0, 25000.0, 2.0);
        auto out = fir::apply_zero_phase(f, in);
        auto [amp, phase] = fit_tone(out.stream.samples, out.valid_begin, out.valid_end, 50.0,
                                     25000.0);
        CHECK(amp > 0.95);
        CHECK(amp < 1.05);
        CHECK(std::abs(phase) < 1e-3);
    }
    SECTION("2 kHz tone attenuated by more than 40 dB") {
        auto in = testutil::constant_sine(2000.0, 25000.0, 1.0);
        auto out = fir::apply_zero_phase(f, in);
        auto [amp, phase] = fit_tone(out.stream.samples, out.valid_begin, out.valid_end, 2000.0,
                                     25000.0);
        CHECK(20.0 * std::log10(amp) < -40.0);
    }
    SECTION("constant input stays constant on the valid region") {
        SampleStream in{std::vector<double>(2000, 3.25), 25000.0, {}};
        auto out = fir::apply_zero_phase(f, in);
        for (std::size_t i = out.valid_begin; i < out.valid_end; ++i)
            CHECK(out.stream.samples[i] == Approx(3.25).margin(1e-12));
    }
    SECTION("stream shorter than the filter is rejected") {
        SampleStream in{std::vector<double>(100, 0.0), 25000.0, {}};
        CHECK_THROWS_AS(fir::apply_zero_phase(f, in), std::invalid_argument);
    }
    SECTION("gain equivariance is exact for power-of-two scales") {
        auto in = testutil::constant_sine(50.0, 25000.0, 0.5, 0.4);
        auto scaled = in;
        for (double& v : scaled.samples) v *= 4.0;
        auto a = fir::apply_zero_phase(f, in);
        auto b = fir::apply_zero_phase(f, scaled);
        for (std::size_t i = a.valid_begin; i < a.valid_end; ++i)
            CHECK(4.0 * a.stream.samples[i] == b.stream.samples[i]);
    }
    SECTION("cross-correlation of input and output peaks at lag zero") {
        for (double freq : {10.0, 20.0}) {
            auto in = testutil::constant_sine(freq, 25000.0, 1.0, 0.7);
            auto out = fir::apply_zero_phase(f, in);
            // Correlate over whole tone periods so edge terms cancel.
            const double period = 25000.0 / freq;
            const auto span = static_cast<std::size_t>(
                std::floor(static_cast<double>(out.valid_end - out.valid_begin - 10) / period) *
                period);
            double best = -1e300;
            int best_lag = -99;
            for (int lag = -5; lag <= 5; ++lag) {
                double acc = 0;
                for (std::size_t i = out.valid_begin; i < out.valid_begin + span; ++i)
                    acc += in.samples[static_cast<std::size_t>(static_cast<long>(i) + lag)] *
                           out.stream.samples[i];
                if (acc > best) {
                    best = acc;
                    best_lag = lag;
                }
            }
            CHECK(best_lag == 0);
        }
    }
}

TEST_CASE("streaming filter equals batch bit-for-bit") {
    auto f = fir::design_zc_prefilter(25000.0, 50.0);
    auto in = testutil::constant_sine(49.7, 25000.0, 0.8, 1.1);
    auto batch = fir::apply_zero_phase(f, in);

    std::mt19937 rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        fir::FilterState state(f);
        std::vector<double> streamed;
        std::size_t pos = 0;
        while (pos < in.samples.size()) {
            std::uniform_int_distribution<std::size_t> d(1, 4000);
            const std::size_t n = std::min(d(rng), in.samples.size() - pos);
            std::vector<double> block(in.samples.begin() + pos, in.samples.begin() + pos + n);
            auto out = state.feed(block);
            streamed.insert(streamed.end(), out.begin(), out.end());
            pos += n;
        }
        REQUIRE(streamed.size() == batch.valid_end - batch.valid_begin);
        bool identical = true;
        for (std::size_t i = 0; i < streamed.size(); ++i)
            identical = identical && streamed[i] == batch.stream.samples[batch.valid_begin + i];
        CHECK(identical);
    }
}

TEST_CASE("modulation low-pass family") {
    SECTION("unit DC gain") {
        auto f = fir::design_modulation_lowpass(0.1, 1.0);
        double sum = 0;
        for (double t : f.taps) sum += t;
        CHECK(sum == Approx(1.0).margin(1e-12));
    }
    SECTION("cutoff at Nyquist degenerates to the identity") {
        auto f = fir::design_modulation_lowpass(0.5, 1.0);
        std::mt19937 rng(3);
        std::normal_distribution<double> g;
        SampleStream in{std::vector<double>(2000), 1.0, {}};
        for (double& v : in.samples) v = g(rng);
        auto out = fir::apply_zero_phase(f, in);
        double err = 0;
        std::size_t n = 0;
        for (std::size_t i = out.valid_begin; i < out.valid_end; ++i, ++n) {
            const double d = out.stream.samples[i] - in.samples[i];
            err += d * d;
        }
        CHECK(std::sqrt(err / static_cast<double>(n)) < 1e-6);
    }
    SECTION("halving the cutoff keeps the dB-per-Hz roll-off steepness") {
        auto slope = [](const fir::FirFilter& f) {
            // dB per Hz between the -6 dB and -40 dB points.
            double f6 = -1, f40 = -1;
            for (double x = 1e-4; x < 0.5; x += 1e-4) {
                const double mag = fir::magnitude_db(f, x);
                if (f6 < 0 && mag <= -6.0) f6 = x;
                if (f40 < 0 && mag <= -40.0) {
                    f40 = x;
                    break;
                }
            }
            REQUIRE(f6 > 0);
            REQUIRE(f40 > f6);
            return 34.0 / (f40 - f6);
        };
        const double s1 = slope(fir::design_modulation_lowpass(0.2, 1.0));
        const double s2 = slope(fir::design_modulation_lowpass(0.1, 1.0));
        CHECK(s1 == Approx(s2).epsilon(0.10));
    }
    SECTION("cutoff out of range rejected") {
        CHECK_THROWS_AS(fir::design_modulation_lowpass(0.0, 1.0), std::invalid_argument);
        CHECK_THROWS_AS(fir::design_modulation_lowpass(0.6, 1.0), std::invalid_argument);
    }
}
