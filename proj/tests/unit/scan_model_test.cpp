#include <filesystem>
#include <fstream>
#include <limits>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "fruitmap/scan_model.hpp"

using namespace fruitmap;
namespace fs = std::filesystem;
using fixtures::TempDir;

namespace {

FrameRecord patch_frame(Side side, int index, int w = 40, int h = 30) {
    FrameRecord f;
    f.frame_index = index;
    f.side = side;
    f.intrinsics = {50.0, 50.0, 20.0, 15.0, w, h};
    f.depth = DepthRaster(w, h);
    f.masks = InstanceMaskRaster(w, h);
    for (int row = 5; row < 15; ++row) {
        for (int col = 5; col < 15; ++col) {
            f.depth.at(col, row) = 0.4f;
            f.masks.at(col, row) = 7;
        }
    }
    return f;
}

void write_dataset(const fs::path& root, int frames_per_side) {
    Manifest m;
    m.dataset_id = "unit";
    save_manifest(root, m);
    for (Side s : {Side::A, Side::B}) {
        save_fiducial(root, {s, RigidTransform::translation(Vec3(0, 0, s == Side::A ? 0.5 : -0.5))});
        for (int i = 0; i < frames_per_side; ++i) {
            save_frame(root, patch_frame(s, i));
        }
    }
}

}  // namespace

TEST(Rasters, DepthRoundTripKeepsInvalidSamples) {
    TempDir dir("depth");
    DepthRaster d(3, 2);
    d.at(0, 0) = 0.25f;
    d.at(2, 1) = -1.0f;
    write_depth_f32(dir / "d.f32", d);
    EXPECT_EQ(fs::file_size(dir / "d.f32"), 24u);
    const auto back = read_depth_f32(dir / "d.f32", 3, 2);
    EXPECT_EQ(back.at(0, 0), 0.25f);
    EXPECT_TRUE(std::isnan(back.at(1, 0)));
    EXPECT_FALSE(DepthRaster::is_valid(back.at(2, 1)));
    EXPECT_THROW(read_depth_f32(dir / "d.f32", 4, 2), DatasetError);
}

TEST(Rasters, MaskPgmRoundTrip) {
    TempDir dir("pgm");
    InstanceMaskRaster m(5, 4);
    m.at(1, 2) = 65535;
    m.at(4, 3) = 258;
    write_mask_pgm(dir / "m.pgm", m);
    const auto h = read_pgm_header(dir / "m.pgm");
    EXPECT_EQ(h.width, 5);
    EXPECT_EQ(h.height, 4);
    EXPECT_EQ(h.maxval, 65535);
    const auto back = read_mask_pgm(dir / "m.pgm");
    EXPECT_EQ(back.values, m.values);
}

TEST(Rasters, MalformedPgmHeader) {
    TempDir dir("badpgm");
    {
        std::ofstream(dir / "p2.pgm") << "P2\n2 2\n65535\n0 0 0 0\n";
        std::ofstream(dir / "max.pgm") << "P5\n2 2\n255\nabcd";
    }
    try {
        read_mask_pgm(dir / "p2.pgm");
        FAIL();
    } catch (const DatasetError& e) {
        EXPECT_EQ(e.kind(), DatasetErrorKind::MalformedHeader);
        EXPECT_NE(std::string(e.what()).find("p2.pgm"), std::string::npos);
    }
    EXPECT_THROW(read_mask_pgm(dir / "max.pgm"), DatasetError);
    EXPECT_THROW(read_mask_pgm(dir / "absent.pgm"), MissingFileError);
}

TEST(Extraction, ConstantDepthPatch) {
    const auto f = patch_frame(Side::A, 0);
    const auto clouds = extract_instance_clouds(f, {}, CloudFrame::CameraFrame);
    ASSERT_EQ(clouds.size(), 1u);
    EXPECT_EQ(clouds[0].instance_id, 7);
    ASSERT_EQ(clouds[0].points.size(), 100u);
    for (const auto& p : clouds[0].points) {
        EXPECT_DOUBLE_EQ(p.z(), static_cast<double>(0.4f));
    }
}

TEST(Extraction, SideFrameAppliesPose) {
    auto f = patch_frame(Side::A, 0);
    f.pose = RigidTransform::translation(Vec3(1, 2, 3));
    const auto cam = extract_instance_clouds(f, {}, CloudFrame::CameraFrame);
    const auto side = extract_instance_clouds(f);
    ASSERT_EQ(side.size(), 1u);
    EXPECT_TRUE(side[0].points[17].isApprox(cam[0].points[17] + Vec3(1, 2, 3)));
}

TEST(Extraction, InvalidDepthAndSmallInstancesOmitted) {
    auto f = patch_frame(Side::A, 0);
    for (int col = 20; col < 30; ++col) {
        f.masks.at(col, 20) = 9;  // no valid depth behind it
    }
    f.masks.at(0, 0) = 3;
    f.depth.at(0, 0) = 0.5f;
    auto clouds = extract_instance_clouds(f, {4});
    ASSERT_EQ(clouds.size(), 1u);
    EXPECT_EQ(clouds[0].instance_id, 7);
    clouds = extract_instance_clouds(f, {1});
    ASSERT_EQ(clouds.size(), 2u);
    EXPECT_EQ(clouds[0].instance_id, 3);
}

TEST(Dataset, LoadsWrittenLayout) {
    TempDir dir("ds");
    write_dataset(dir.path(), 3);
    const auto ds = load_dataset(dir.path());
    EXPECT_EQ(ds.dataset_id(), "unit");
    EXPECT_EQ(ds.frame_count(Side::A), 3);
    EXPECT_EQ(ds.frame_count(Side::B), 3);
    EXPECT_FALSE(ds.ground_truth().has_value());
    const auto f = ds.frame(Side::B, 2);
    EXPECT_EQ(f.frame_index, 2);
    EXPECT_EQ(f.masks.at(6, 6), 7);
    EXPECT_NEAR(ds.fiducial(Side::B).pose.translation().z(), -0.5, 1e-15);
    EXPECT_THROW(ds.frame(Side::A, 3), DomainError);
}

TEST(Dataset, MissingRootIsIoError) {
    try {
        load_dataset("/nonexistent/fruitmap-dataset");
        FAIL();
    } catch (const MissingFileError& e) {
        EXPECT_NE(std::string(e.what()).find("/nonexistent/fruitmap-dataset"), std::string::npos);
    }
}

TEST(Dataset, DimensionMismatchNamesBothFiles) {
    TempDir dir("dim");
    write_dataset(dir.path(), 1);
    auto f = patch_frame(Side::A, 0, 200, 200);
    save_frame(dir.path(), f);
    write_mask_pgm(dir.path() / "sides/A/masks/0.pgm", InstanceMaskRaster(100, 100));
    try {
        load_dataset(dir.path());
        FAIL();
    } catch (const DatasetError& e) {
        EXPECT_EQ(e.kind(), DatasetErrorKind::DimensionMismatch);
        const std::string msg = e.what();
        EXPECT_NE(msg.find("masks/0.pgm"), std::string::npos);
        EXPECT_NE(msg.find("depth/0.f32"), std::string::npos);
    }
}

TEST(Dataset, MissingFiducial) {
    TempDir dir("fid");
    write_dataset(dir.path(), 1);
    fs::remove(dir.path() / "sides/B/fiducial.json");
    try {
        load_dataset(dir.path());
        FAIL();
    } catch (const DatasetError& e) {
        EXPECT_EQ(e.kind(), DatasetErrorKind::MissingFiducial);
        EXPECT_NE(std::string(e.what()).find("fiducial missing for side B"), std::string::npos);
    }
}

TEST(Dataset, FrameIndexGapAndDuplicate) {
    TempDir dir("gap");
    write_dataset(dir.path(), 3);
    fs::remove(dir.path() / "sides/A/frames/1.json");
    try {
        load_dataset(dir.path());
        FAIL();
    } catch (const DatasetError& e) {
        EXPECT_EQ(e.kind(), DatasetErrorKind::FrameIndexGap);
    }
    fs::copy_file(dir.path() / "sides/A/frames/2.json", dir.path() / "sides/A/frames/2b.json");
    fs::copy_file(dir.path() / "sides/A/frames/0.json", dir.path() / "sides/A/frames/1.json");
    try {
        load_dataset(dir.path());
        FAIL();
    } catch (const DatasetError& e) {
        EXPECT_EQ(e.kind(), DatasetErrorKind::DuplicateFrameIndex);
    }
}

TEST(Dataset, BadManifest) {
    TempDir dir("manifest");
    write_dataset(dir.path(), 1);
    std::ofstream(dir.path() / "manifest.json") << R"({"format_version": "1", "units": "mm", "sides": ["A"]})";
    try {
        load_dataset(dir.path());
        FAIL();
    } catch (const DatasetError& e) {
        EXPECT_EQ(e.kind(), DatasetErrorKind::BadManifest);
    }
}

TEST(Dataset, SingleSideManifest) {
    TempDir dir("oneside");
    write_dataset(dir.path(), 2);
    std::ofstream(dir.path() / "manifest.json") << R"({"format_version": "1", "units": "meters", "sides": ["A"]})";
    const auto ds = load_dataset(dir.path());
    EXPECT_TRUE(ds.has_side(Side::A));
    EXPECT_FALSE(ds.has_side(Side::B));
    EXPECT_EQ(ds.dataset_id(), dir.path().filename().string());
}
