#include "ckada/waveform.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <fstream>

using namespace ckada;

TEST(Waveform, SinglePointLandsInItsBin)
{
    // bins of width 1 over [0, 10): z = 3.5 is bin 3
    const auto wf = build_pseudo_waveform({{0.0, 0.0, 3.5, 5.0}}, 1.0, 0.0, 10.0, 10);
    ASSERT_EQ(wf.raster.values.rows(), 1);
    Eigen::RowVectorXd want = Eigen::RowVectorXd::Zero(10);
    want(3) = 5.0;
    EXPECT_EQ(wf.raster.values.row(0), want);
    EXPECT_EQ(wf.rows, 1);
    EXPECT_EQ(wf.cols, 1);
}

TEST(Waveform, MeanIntensityPerBin)
{
    const auto wf = build_pseudo_waveform({{0.1, 0.1, 1.2, 2.0}, {0.3, 0.2, 1.7, 4.0}}, 1.0, 0.0, 4.0, 4);
    ASSERT_EQ(wf.raster.values.rows(), 1);
    EXPECT_DOUBLE_EQ(wf.raster.values(0, 1), 3.0);
    EXPECT_EQ(wf.counts(0, 1), 2);
}

TEST(Waveform, UpperBoundIsExclusive)
{
    const auto wf = build_pseudo_waveform({{0.0, 0.0, 10.0, 9.0}, {0.0, 0.0, 0.0, 1.0}}, 1.0, 0.0, 10.0, 5);
    EXPECT_EQ(wf.counts.sum(), 1);
    EXPECT_EQ(wf.raster.values(0, 4), 0.0);
    EXPECT_EQ(wf.raster.values(0, 0), 1.0);
}

TEST(Waveform, CellsFollowGridOrigin)
{
    // origin at (10, 20); cell 2 m; row from y, col from x
    const PointCloud pc = {{10.0, 20.0, 0.5, 1.0}, {15.9, 20.0, 0.5, 2.0}, {10.0, 23.0, 0.5, 3.0}};
    const auto wf = build_pseudo_waveform(pc, 2.0, 0.0, 1.0, 1);
    EXPECT_EQ(wf.cols, 3);
    EXPECT_EQ(wf.rows, 2);
    ASSERT_EQ(wf.cells.size(), 3u);
    EXPECT_EQ(wf.cells[0], std::make_pair(0, 0));
    EXPECT_EQ(wf.cells[1], std::make_pair(0, 2));
    EXPECT_EQ(wf.cells[2], std::make_pair(1, 0));
    EXPECT_EQ(wf.raster.values(1, 0), 2.0);
    EXPECT_EQ(wf.raster.values(2, 0), 3.0);
}

TEST(Waveform, CountsConserveInRangePoints)
{
    ckada::Rng rng(31);
    for (int trial = 0; trial < 20; ++trial) {
        PointCloud pc;
        const int n = 1 + static_cast<int>(rng.below(300));
        for (int i = 0; i < n; ++i)
            pc.push_back({rng.uniform(0, 20), rng.uniform(0, 20), rng.uniform(-5, 35), rng.uniform(0, 100)});
        const double z0 = 0.0, z1 = 30.0;
        int in_range = 0;
        for (const auto& p : pc)
            in_range += p.z >= z0 && p.z < z1;
        if (in_range == 0) {
            EXPECT_EQ(support::error_of([&] { build_pseudo_waveform(pc, 2.5, z0, z1, 12); }),
                      ErrorCode::empty_cloud);
            continue;
        }
        const auto wf = build_pseudo_waveform(pc, 2.5, z0, z1, 12);
        EXPECT_EQ(wf.counts.sum(), in_range);
        for (Eigen::Index r = 0; r < wf.counts.rows(); ++r) {
            EXPECT_GT(wf.counts.row(r).sum(), 0);
            for (Eigen::Index b = 0; b < wf.counts.cols(); ++b)
                if (wf.counts(r, b) == 0) {
                    EXPECT_EQ(wf.raster.values(r, b), 0.0);
                }
        }
    }
}

TEST(Waveform, Errors)
{
    EXPECT_EQ(support::error_of([] { build_pseudo_waveform({}, 1.0, 0.0, 1.0, 1); }), ErrorCode::empty_cloud);
    EXPECT_EQ(support::error_of([] { build_pseudo_waveform({{0, 0, 5, 1}}, 1.0, 0.0, 1.0, 1); }),
              ErrorCode::empty_cloud);
    EXPECT_EQ(support::error_of([] { build_pseudo_waveform({{0, 0, 0, 1}}, 0.0, 0.0, 1.0, 1); }),
              ErrorCode::invalid_argument);
    EXPECT_EQ(support::error_of([] { build_pseudo_waveform({{0, 0, 0, 1}}, 1.0, 1.0, 1.0, 1); }),
              ErrorCode::invalid_argument);
    EXPECT_EQ(support::error_of([] { build_pseudo_waveform({{0, 0, 0, -1}}, 1.0, 0.0, 1.0, 1); }),
              ErrorCode::invalid_argument);
}

TEST(Waveform, LoadsPointCloudCsv)
{
    const auto dir = support::scratch_dir("points");
    std::ofstream(dir / "p.csv") << "x,y,z,intensity\n0,0,1,2\n1,1,2,3\n";
    const auto pc = load_point_cloud_csv((dir / "p.csv").string(), true);
    ASSERT_EQ(pc.size(), 2u);
    EXPECT_EQ(pc[1].intensity, 3.0);
    std::ofstream(dir / "bad.csv") << "0,0,1\n";
    EXPECT_EQ(support::error_of([&] { load_point_cloud_csv((dir / "bad.csv").string()); }), ErrorCode::parse);
}
