#include <doctest.h>

#include <cmath>
#include <cstdio>

#include "msrt/phantom.hpp"

using namespace msrt;

namespace {

CaseSpec small_spec() {
    CaseSpec s;
    s.volume_cm3 = 2.60;
    s.n_oars = 2;
    s.grid_dims = {24, 24, 24};
    s.grid_spacing_mm = 2.0;
    s.n_beams = 3;
    s.beamlet_rows = 3;
    s.beamlet_cols = 3;
    return s;
}

}  // namespace

TEST_CASE("case 3 analogue has the requested structures") {
    CaseSpec s = small_spec();
    PatientCase pc = generate_case(s);
    CHECK(pc.tissues.tissues.size() == 3);
    CHECK(pc.tissues.tumor().name == "Tumor_0");
    CHECK(pc.tissues.oars().size() == 2);
    const double voxvol = std::pow(s.grid_spacing_mm, 3);
    const double vol = static_cast<double>(pc.ctv().size()) * voxvol;
    CHECK(std::abs(vol - 2600.0) <= voxvol);  // within one voxel's volume
}

TEST_CASE("volume of exactly one voxel gives a single-voxel tumor") {
    CaseSpec s = small_spec();
    s.volume_cm3 = std::pow(s.grid_spacing_mm, 3) / 1000.0;
    s.n_oars = 0;
    PatientCase pc = generate_case(s);
    CHECK(pc.ctv().size() == 1);
    CHECK(pc.tissues.oars().empty());
}

TEST_CASE("volume below one voxel is an infeasible spec") {
    CaseSpec s = small_spec();
    s.volume_cm3 = 0.9 * std::pow(s.grid_spacing_mm, 3) / 1000.0;
    CHECK_THROWS_AS(generate_case(s), InfeasibleSpec);
}

TEST_CASE("tumor voxel count matches the brute-force sphere scan") {
    // 4.52 cm^3 on a 2 mm grid: 565 +- 1 voxels
    CaseSpec s = small_spec();
    s.volume_cm3 = 4.52;
    s.grid_dims = {32, 32, 32};
    s.n_oars = 0;
    PatientCase pc = generate_case(s);
    const auto count = static_cast<long>(pc.ctv().size());
    CHECK(std::abs(count - 565) <= 1);

    // the voxel set must be exactly the set of centers inside some sphere:
    // scan with the radius implied by the farthest member
    const Vec3 c = {0.131 * 2.0, 0.293 * 2.0, 0.417 * 2.0};
    double r = 0.0;
    for (auto id : pc.ctv()) r = std::max(r, norm(pc.grid.center(id) - c));
    long scanned = 0;
    for (std::int64_t id = 0; id < pc.grid.count(); ++id)
        if (norm(pc.grid.center(id) - c) <= r) ++scanned;
    CHECK(scanned == count);
}

TEST_CASE("oars do not overlap the tumor or its ptv expansion") {
    CaseSpec s = small_spec();
    s.grid_dims = {32, 32, 32};
    s.include_ring = true;
    PatientCase pc = generate_case(s);
    const VoxelSet ptv = dilate(pc.ctv(), s.ptv_margin_mm, pc.grid);
    for (const auto* oar : pc.tissues.oars()) {
        CHECK(sets_disjoint(oar->voxels, pc.ctv()));
        CHECK(sets_disjoint(oar->voxels, ptv));
        CHECK_FALSE(oar->voxels.empty());
    }
    // ring is present and disjoint from everything else
    bool have_ring = false;
    for (const auto& t : pc.tissues.tissues)
        if (t.name == "Ring") have_ring = true;
    CHECK(have_ring);
}

TEST_CASE("generate_case is deterministic") {
    CaseSpec s = small_spec();
    PatientCase a = generate_case(s);
    PatientCase b = generate_case(s);
    CHECK(a.ctv() == b.ctv());
    REQUIRE(a.beams.beamlets.size() == b.beams.beamlets.size());
    for (size_t i = 0; i < a.beams.beamlets.size(); ++i) {
        CHECK(a.beams.beamlets[i].source == b.beams.beamlets[i].source);
        CHECK(a.beams.beamlets[i].dir == b.beams.beamlets[i].dir);
    }
}

TEST_CASE("beamlet directions are unit norm") {
    PatientCase pc = generate_case(small_spec());
    for (const auto& b : pc.beams.beamlets) CHECK(std::abs(norm(b.dir) - 1.0) <= 1e-9);
}

TEST_CASE("kernel values at hand-computed positions") {
    // axis-aligned beam along +x entering the box at x = 0
    VoxelGrid g({10, 10, 10}, {2, 2, 2}, {0, 0, 0});
    PencilKernel k{1.0, 100.0, 3.0};
    Beamlet b{{-50.0, 9.0, 9.0}, {1.0, 0.0, 0.0}};

    // entry at x=0, so depth = x; lateral distance from the (y,z)=(9,9) axis
    auto expected = [&](const Vec3& p) {
        const double depth = p[0];
        const double r2 = (p[1] - 9.0) * (p[1] - 9.0) + (p[2] - 9.0) * (p[2] - 9.0);
        return 1.0 * std::exp(-depth / 100.0) * std::exp(-r2 / 18.0);
    };
    const Vec3 probes[5] = {{1.0, 9.0, 9.0}, {5.0, 9.0, 9.0}, {5.0, 12.0, 9.0},
                            {11.0, 9.0, 4.0}, {19.0, 6.0, 13.0}};
    for (const auto& p : probes)
        CHECK(beamlet_dose_at(g, k, b, p) == doctest::Approx(expected(p)).epsilon(1e-12));

    // on-axis surface voxel sees the kernel peak
    CHECK(beamlet_dose_at(g, k, b, {0.0, 9.0, 9.0}) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("attenuation limit sends deep doses to zero") {
    VoxelGrid g({10, 10, 10}, {2, 2, 2}, {0, 0, 0});
    PencilKernel k{1.0, 0.05, 3.0};  // almost opaque medium
    Beamlet b{{-50.0, 9.0, 9.0}, {1.0, 0.0, 0.0}};
    CHECK(beamlet_dose_at(g, k, b, {18.0, 9.0, 9.0}) < 1e-12);
}

TEST_CASE("dose matrix entries are nonnegative finite and tumor rows positive") {
    CaseSpec s = small_spec();
    PatientCase pc = generate_case(s);
    DoseMatrix m = dose_matrix(pc.grid, s.kernel, pc.beams, pc.ctv());
    CHECK(m.allFinite());
    CHECK((m.array() >= 0.0).all());
    for (Eigen::Index i = 0; i < m.rows(); ++i) CHECK(m.row(i).sum() > 0.0);
}

TEST_CASE("dose matrix io round trip") {
    CaseSpec s = small_spec();
    s.n_beams = 1;
    PatientCase pc = generate_case(s);
    DoseMatrix m = dose_matrix(pc.grid, s.kernel, pc.beams, pc.ctv());
    const std::string path = "/tmp/msrt_test_dose.dose";
    write_dose_matrix(path, m);
    DoseMatrix r = read_dose_matrix(path);
    REQUIRE(r.rows() == m.rows());
    REQUIRE(r.cols() == m.cols());
    CHECK((r - m).cwiseAbs().maxCoeff() == 0.0);
    std::remove(path.c_str());
}

TEST_CASE("tissue validation rejects overlap and bad thresholds") {
    VoxelGrid g({4, 4, 4}, {1, 1, 1}, {0, 0, 0});
    TissueSet ts;
    Tissue a;
    a.name = "t";
    a.is_tumor = true;
    a.voxels = {1, 2};
    a.t_minus = 5;
    a.t_plus = 10;
    Tissue b;
    b.name = "o";
    b.voxels = {2, 3};
    ts.tissues = {a, b};
    CHECK_THROWS_AS(ts.validate(g), InvalidArgument);
    ts.tissues[1].voxels = {3};
    CHECK_NOTHROW(ts.validate(g));
    ts.tissues[0].t_minus = 20;
    CHECK_THROWS_AS(ts.validate(g), InvalidArgument);
}
