#include <doctest/doctest.h>

#include <filesystem>

#include "kcd/data.hpp"
#include "kcd/degrade.hpp"
#include "kcd/rng.hpp"
#include "oracles.hpp"

using namespace kcd;

TEST_SUITE("degrade") {

TEST_CASE("D(x,0) reproduces the input; D(x,T) equals the zero-filled reconstruction") {
    Rng rng(31);
    for (MaskFamily fam : {MaskFamily::CartesianRandom, MaskFamily::CartesianEquispaced,
                           MaskFamily::Gaussian1D, MaskFamily::Gaussian2D}) {
        const ComplexImage x = oracle::random_complex_image(32, 32, rng);
        const SamplingMask mask = make_mask(fam, 32, 32, 4.0, 0.08, 5);
        const MaskSchedule s = make_schedule(mask, 8, 11);
        const ComplexImage x0 = degrade(x, 0, s);
        CHECK(oracle::max_rel_err(x0, x) < 1e-12);
        const ComplexImage xT = degrade(x, 8, s);
        const ComplexImage zf = zero_filled(forward_transform(x), mask);
        for (std::size_t i = 0; i < xT.data.size(); ++i) CHECK(xT.data[i] == zf.data[i]);
    }
}

TEST_CASE("degradation at t keeps exactly the scheduled frequencies (vs brute-force DFT)") {
    Rng rng(32);
    const ComplexImage x = oracle::random_complex_image(12, 12, rng);
    const SamplingMask mask = make_mask(MaskFamily::Gaussian2D, 12, 12, 3.0, 0.05, 2);
    const int T = 5;
    const MaskSchedule s = make_schedule(mask, T, 7);
    for (int t = 0; t <= T; ++t) {
        const SamplingMask mt = mask_at(s, t);
        const KSpaceGrid k_oracle = oracle::dft2_centered(x);
        KSpaceGrid want(12, 12);
        for (int y = 0; y < 12; ++y)
            for (int c = 0; c < 12; ++c)
                want.at(y, c) = mt.at(y, c) ? k_oracle.at(y, c) : Complex(0.0, 0.0);
        const ComplexImage xt = degrade(x, t, s);
        const ComplexImage want_img = oracle::idft2_centered(want);
        CAPTURE(t);
        CHECK(oracle::max_rel_err(xt, want_img) < 1e-11);
    }
}

TEST_CASE("k-space energy is non-increasing along the nested schedule") {
    Rng rng(33);
    const ComplexImage x = oracle::random_complex_image(24, 24, rng);
    const SamplingMask mask = make_mask(MaskFamily::CartesianRandom, 24, 24, 4.0, 0.1, 4);
    const int T = 6;
    const MaskSchedule s = make_schedule(mask, T, 3);
    double prev = norm_l2(forward_transform(degrade(x, 0, s)));
    for (int t = 1; t <= T; ++t) {
        const double e = norm_l2(forward_transform(degrade(x, t, s)));
        CHECK(e <= prev + 1e-12);
        prev = e;
    }
}

TEST_CASE("apply_mask zeroes exactly the complement") {
    Rng rng(34);
    KSpaceGrid k(16, 16);
    for (auto& v : k.data) v = Complex(rng.normal(), rng.normal());
    const SamplingMask mask = make_mask(MaskFamily::Gaussian2D, 16, 16, 4.0, 0.05, 8);
    const KSpaceGrid masked = apply_mask(k, mask);
    for (int y = 0; y < 16; ++y)
        for (int x = 0; x < 16; ++x) {
            if (mask.at(y, x))
                CHECK(masked.at(y, x) == k.at(y, x));
            else
                CHECK(masked.at(y, x) == Complex(0.0, 0.0));
        }
}

TEST_CASE("degradation strip renders the requested steps") {
    namespace fs = std::filesystem;
    Rng rng(35);
    const ComplexImage x = oracle::random_complex_image(24, 24, rng);
    const SamplingMask mask = make_mask(MaskFamily::CartesianRandom, 24, 24, 4.0, 0.1, 4);
    const MaskSchedule s = make_schedule(mask, 8, 3);
    const std::vector<int> steps = {0, 4, 8};
    const std::vector<ComplexImage> strip = degradation_strip(x, s, steps);
    REQUIRE(strip.size() == 3);
    CHECK(oracle::max_rel_err(strip[0], x) < 1e-12);
    const fs::path dir = fs::temp_directory_path() / "kcd_strip_test";
    fs::create_directories(dir);
    export_strip_png(strip, steps, (dir / "f_").string());
    for (int t : steps) CHECK(fs::exists(dir / ("f_" + std::to_string(t) + ".png")));
    fs::remove_all(dir);
}

TEST_CASE("step bounds are validated") {
    Rng rng(36);
    const ComplexImage x = oracle::random_complex_image(8, 8, rng);
    const SamplingMask mask = make_mask(MaskFamily::CartesianRandom, 8, 8, 2.0, 0.2, 4);
    const MaskSchedule s = make_schedule(mask, 4, 3);
    CHECK_THROWS_AS(degrade(x, -1, s), ValidationError);
    CHECK_THROWS_AS(degrade(x, 5, s), ValidationError);
    ComplexImage wrong(9, 8);
    CHECK_THROWS_AS(degrade(wrong, 1, s), ValidationError);
}

} // TEST_SUITE
