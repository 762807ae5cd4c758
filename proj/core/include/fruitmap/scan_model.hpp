#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fruitmap/errors.hpp"
#include "fruitmap/geometry.hpp"
#include "fruitmap/ground_truth.hpp"
#include "fruitmap/side.hpp"

namespace fruitmap {

/// Depth in meters, row-major. Non-finite or non-positive samples are invalid.
struct DepthRaster {
    int width = 0;
    int height = 0;
    std::vector<float> values;

    DepthRaster() = default;
    DepthRaster(int w, int h);

    float at(int col, int row) const { return values[index(col, row)]; }
    float& at(int col, int row) { return values[index(col, row)]; }
    std::size_t index(int col, int row) const {
        return static_cast<std::size_t>(row) * static_cast<std::size_t>(width) + static_cast<std::size_t>(col);
    }

    static bool is_valid(float d) { return std::isfinite(d) && d > 0.0f; }
};

/// Per-pixel instance id; 0 is background. Ids need not be contiguous.
struct InstanceMaskRaster {
    int width = 0;
    int height = 0;
    std::vector<std::uint16_t> values;

    InstanceMaskRaster() = default;
    InstanceMaskRaster(int w, int h);

    std::uint16_t at(int col, int row) const { return values[index(col, row)]; }
    std::uint16_t& at(int col, int row) { return values[index(col, row)]; }
    std::size_t index(int col, int row) const {
        return static_cast<std::size_t>(row) * static_cast<std::size_t>(width) + static_cast<std::size_t>(col);
    }
};

struct FrameRecord {
    int frame_index = 0;
    Side side = Side::A;
    RigidTransform pose;  // camera-to-side
    CameraIntrinsics intrinsics;
    DepthRaster depth;
    InstanceMaskRaster masks;
};

struct FiducialObservation {
    Side side = Side::A;
    RigidTransform pose;  // fiducial-to-side
};

/// Kinds of dataset validation failure. Each message also names the offending path(s).
enum class DatasetErrorKind {
    MalformedHeader,
    DimensionMismatch,
    DuplicateFrameIndex,
    FrameIndexGap,
    MissingFiducial,
    BadManifest,
};

class DatasetError : public ValidationError {
public:
    DatasetError(DatasetErrorKind kind, const std::string& what) : ValidationError(what), kind_(kind) {}
    DatasetErrorKind kind() const noexcept { return kind_; }

private:
    DatasetErrorKind kind_;
};

class MissingFileError : public IoError {
public:
    using IoError::IoError;
};

/// Anything that yields frames in frame_index order per side: a dataset on disk
/// or a simulator rendering on demand.
class ScanSource {
public:
    virtual ~ScanSource() = default;

    virtual std::vector<Side> sides() const = 0;
    virtual int frame_count(Side side) const = 0;
    /// Frame with the given index, rasters loaded.
    virtual FrameRecord frame(Side side, int frame_index) const = 0;
    virtual FiducialObservation fiducial(Side side) const = 0;
    /// Identifier recorded in map provenance.
    virtual std::string dataset_id() const = 0;

    bool has_side(Side side) const;
};

struct Manifest {
    std::string format_version = "1";
    std::string units = "meters";
    std::string axis_convention = "camera +z forward, +x right, +y down; poses camera-to-side";
    std::vector<Side> sides{Side::A, Side::B};
    std::string dataset_id;
};

/// Frame metadata validated at load time; rasters are read on demand.
struct FrameHeader {
    int frame_index = 0;
    Side side = Side::A;
    RigidTransform pose;
    CameraIntrinsics intrinsics;
    std::filesystem::path depth_path;
    std::filesystem::path mask_path;
};

class ScanDataset final : public ScanSource {
public:
    ScanDataset(std::filesystem::path root, Manifest manifest, std::map<Side, std::vector<FrameHeader>> frames,
                std::map<Side, FiducialObservation> fiducials, std::optional<GroundTruth> truth);

    std::vector<Side> sides() const override { return manifest_.sides; }
    int frame_count(Side side) const override;
    FrameRecord frame(Side side, int frame_index) const override;
    FiducialObservation fiducial(Side side) const override;
    std::string dataset_id() const override { return manifest_.dataset_id; }

    const std::filesystem::path& root() const noexcept { return root_; }
    const Manifest& manifest() const noexcept { return manifest_; }
    const std::vector<FrameHeader>& headers(Side side) const;
    const std::optional<GroundTruth>& ground_truth() const noexcept { return truth_; }

private:
    std::filesystem::path root_;
    Manifest manifest_;
    std::map<Side, std::vector<FrameHeader>> frames_;
    std::map<Side, FiducialObservation> fiducials_;
    std::optional<GroundTruth> truth_;
};

/// Loads and validates the directory layout written by save_* / the simulator.
/// Missing files raise MissingFileError; structural problems raise DatasetError.
ScanDataset load_dataset(const std::filesystem::path& root);

// Raster codecs. Depth: little-endian float32, row-major, no header.
// Masks: binary PGM (P5), maxval 65535, big-endian 16-bit samples.
DepthRaster read_depth_f32(const std::filesystem::path& path, int width, int height);
void write_depth_f32(const std::filesystem::path& path, const DepthRaster& depth);
InstanceMaskRaster read_mask_pgm(const std::filesystem::path& path);
void write_mask_pgm(const std::filesystem::path& path, const InstanceMaskRaster& masks);

struct PgmHeader {
    int width = 0;
    int height = 0;
    int maxval = 0;
    std::size_t data_offset = 0;
};
PgmHeader read_pgm_header(const std::filesystem::path& path);

// Writers for the dataset layout.
void save_manifest(const std::filesystem::path& root, const Manifest& manifest);
void save_fiducial(const std::filesystem::path& root, const FiducialObservation& fiducial);
/// Writes sides/<S>/frames/<idx>.json plus its depth and mask rasters.
void save_frame(const std::filesystem::path& root, const FrameRecord& frame);

struct ExtractionConfig {
    int min_points = 30;
};

struct InstanceCloud {
    std::uint16_t instance_id = 0;
    PointCloud points;
};

enum class CloudFrame { SideFrame, CameraFrame };

/// Backprojects every valid-depth pixel of each nonzero mask id, grouped by id in
/// ascending order. Instances with fewer than min_points points are dropped.
std::vector<InstanceCloud> extract_instance_clouds(const FrameRecord& frame, const ExtractionConfig& cfg = {},
                                                   CloudFrame output = CloudFrame::SideFrame);

}  // namespace fruitmap
