#include "fruitmap/scan_model.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cstring>
#include <fstream>
#include <limits>

#include <fmt/format.h>

#include "fruitmap/json_io.hpp"

namespace fruitmap {

namespace fs = std::filesystem;
using nlohmann::json;

DepthRaster::DepthRaster(int w, int h)
    : width(w), height(h),
      values(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), std::numeric_limits<float>::quiet_NaN()) {}

InstanceMaskRaster::InstanceMaskRaster(int w, int h)
    : width(w), height(h), values(static_cast<std::size_t>(w) * static_cast<std::size_t>(h), 0) {}

bool ScanSource::has_side(Side side) const {
    const auto s = sides();
    return std::find(s.begin(), s.end(), side) != s.end();
}

namespace {

std::vector<char> read_bytes(const fs::path& path) {
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) {
        throw MissingFileError(fmt::format("cannot open '{}'", path.string()));
    }
    const auto size = static_cast<std::size_t>(in.tellg());
    std::vector<char> buf(size);
    in.seekg(0);
    if (size > 0 && !in.read(buf.data(), static_cast<std::streamsize>(size))) {
        throw IoError(fmt::format("read failed for '{}'", path.string()));
    }
    return buf;
}

void ensure_parent(const fs::path& path) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
    if (ec) {
        throw IoError(fmt::format("cannot create directory '{}': {}", path.parent_path().string(), ec.message()));
    }
}

void write_bytes(const fs::path& path, const std::string& header, const std::vector<unsigned char>& body) {
    ensure_parent(path);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError(fmt::format("cannot write '{}'", path.string()));
    }
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    out.write(reinterpret_cast<const char*>(body.data()), static_cast<std::streamsize>(body.size()));
    if (!out) {
        throw IoError(fmt::format("write failed for '{}'", path.string()));
    }
}

fs::path side_dir(const fs::path& root, Side side) { return root / "sides" / std::string(to_string(side)); }

[[noreturn]] void fail(DatasetErrorKind kind, const std::string& msg) { throw DatasetError(kind, msg); }

FrameHeader parse_frame_header(const fs::path& json_path, const fs::path& sdir, Side side) {
    json j;
    try {
        j = read_json_file(json_path);
    } catch (const ValidationError& e) {
        fail(DatasetErrorKind::MalformedHeader, e.what());
    }
    FrameHeader h;
    h.side = side;
    try {
        h.frame_index = j.at("frame_index").get<int>();
        const auto& in = j.at("intrinsics");
        h.intrinsics.fx = in.at("fx").get<double>();
        h.intrinsics.fy = in.at("fy").get<double>();
        h.intrinsics.cx = in.at("cx").get<double>();
        h.intrinsics.cy = in.at("cy").get<double>();
        h.intrinsics.width = in.at("width").get<int>();
        h.intrinsics.height = in.at("height").get<int>();
        h.depth_path = sdir / j.at("depth").get<std::string>();
        h.mask_path = sdir / j.at("masks").get<std::string>();
        h.pose = pose_from_json(j.at("pose"));
        h.intrinsics.validate();
    } catch (const json::exception& e) {
        fail(DatasetErrorKind::MalformedHeader, fmt::format("malformed frame header '{}': {}", json_path.string(), e.what()));
    } catch (const ValidationError& e) {
        fail(DatasetErrorKind::MalformedHeader, fmt::format("invalid frame header '{}': {}", json_path.string(), e.what()));
    }
    if (h.frame_index < 0) {
        fail(DatasetErrorKind::MalformedHeader,
             fmt::format("negative frame_index {} in '{}'", h.frame_index, json_path.string()));
    }
    return h;
}

void validate_rasters(const FrameHeader& h, const fs::path& json_path) {
    const int w = h.intrinsics.width;
    const int ht = h.intrinsics.height;
    if (!fs::is_regular_file(h.depth_path)) {
        throw MissingFileError(
            fmt::format("missing depth raster '{}' (referenced by '{}')", h.depth_path.string(), json_path.string()));
    }
    if (!fs::is_regular_file(h.mask_path)) {
        throw MissingFileError(
            fmt::format("missing mask raster '{}' (referenced by '{}')", h.mask_path.string(), json_path.string()));
    }
    const auto expected = static_cast<std::uintmax_t>(w) * static_cast<std::uintmax_t>(ht) * 4U;
    const auto actual = fs::file_size(h.depth_path);
    if (actual != expected) {
        fail(DatasetErrorKind::DimensionMismatch,
             fmt::format("depth raster '{}' has {} bytes, expected {} for {}x{} declared in '{}'",
                         h.depth_path.string(), actual, expected, w, ht, json_path.string()));
    }
    const PgmHeader pgm = read_pgm_header(h.mask_path);
    if (pgm.width != w || pgm.height != ht) {
        fail(DatasetErrorKind::DimensionMismatch,
             fmt::format("dimension mismatch: masks '{}' are {}x{} but depth '{}' is {}x{}", h.mask_path.string(),
                         pgm.width, pgm.height, h.depth_path.string(), w, ht));
    }
}

}  // namespace

DepthRaster read_depth_f32(const fs::path& path, int width, int height) {
    const auto bytes = read_bytes(path);
    const auto n = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
    if (bytes.size() != n * 4) {
        throw DatasetError(DatasetErrorKind::DimensionMismatch,
                           fmt::format("depth raster '{}' has {} bytes, expected {} for {}x{}", path.string(),
                                       bytes.size(), n * 4, width, height));
    }
    DepthRaster out(width, height);
    for (std::size_t i = 0; i < n; ++i) {
        std::uint32_t bits = 0;
        std::memcpy(&bits, bytes.data() + i * 4, 4);
        if constexpr (std::endian::native == std::endian::big) {
            bits = __builtin_bswap32(bits);
        }
        out.values[i] = std::bit_cast<float>(bits);
    }
    return out;
}

void write_depth_f32(const fs::path& path, const DepthRaster& depth) {
    std::vector<unsigned char> body(depth.values.size() * 4);
    for (std::size_t i = 0; i < depth.values.size(); ++i) {
        auto bits = std::bit_cast<std::uint32_t>(depth.values[i]);
        if constexpr (std::endian::native == std::endian::big) {
            bits = __builtin_bswap32(bits);
        }
        std::memcpy(body.data() + i * 4, &bits, 4);
    }
    write_bytes(path, {}, body);
}

PgmHeader read_pgm_header(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw MissingFileError(fmt::format("cannot open '{}'", path.string()));
    }
    auto malformed = [&](const std::string& why) {
        return DatasetError(DatasetErrorKind::MalformedHeader,
                            fmt::format("malformed PGM header in '{}': {}", path.string(), why));
    };
    char magic[2] = {0, 0};
    in.read(magic, 2);
    if (!in || magic[0] != 'P' || magic[1] != '5') {
        throw malformed("expected binary PGM magic 'P5'");
    }
    auto next_int = [&]() -> int {
        int c = in.get();
        while (c != EOF) {
            if (c == '#') {
                while (c != EOF && c != '\n') {
                    c = in.get();
                }
            } else if (!std::isspace(c)) {
                break;
            }
            c = in.get();
        }
        if (c == EOF || !std::isdigit(c)) {
            throw malformed("expected an unsigned integer");
        }
        long value = 0;
        while (c != EOF && std::isdigit(c)) {
            value = value * 10 + (c - '0');
            if (value > std::numeric_limits<int>::max()) {
                throw malformed("integer overflow");
            }
            c = in.get();
        }
        if (c == EOF || !std::isspace(c)) {
            throw malformed("header field not followed by whitespace");
        }
        return static_cast<int>(value);
    };
    PgmHeader h;
    h.width = next_int();
    h.height = next_int();
    h.maxval = next_int();
    if (h.width <= 0 || h.height <= 0) {
        throw malformed("non-positive dimensions");
    }
    if (h.maxval != 65535) {
        throw malformed(fmt::format("maxval must be 65535, got {}", h.maxval));
    }
    h.data_offset = static_cast<std::size_t>(in.tellg());
    return h;
}

InstanceMaskRaster read_mask_pgm(const fs::path& path) {
    const PgmHeader h = read_pgm_header(path);
    const auto bytes = read_bytes(path);
    const auto n = static_cast<std::size_t>(h.width) * static_cast<std::size_t>(h.height);
    if (bytes.size() < h.data_offset + n * 2) {
        throw DatasetError(DatasetErrorKind::MalformedHeader,
                           fmt::format("PGM '{}' is truncated: {} bytes of samples, expected {}", path.string(),
                                       bytes.size() - h.data_offset, n * 2));
    }
    InstanceMaskRaster out(h.width, h.height);
    const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + h.data_offset);
    for (std::size_t i = 0; i < n; ++i) {
        out.values[i] = static_cast<std::uint16_t>((p[2 * i] << 8) | p[2 * i + 1]);
    }
    return out;
}

void write_mask_pgm(const fs::path& path, const InstanceMaskRaster& masks) {
    std::vector<unsigned char> body(masks.values.size() * 2);
    for (std::size_t i = 0; i < masks.values.size(); ++i) {
        body[2 * i] = static_cast<unsigned char>(masks.values[i] >> 8);
        body[2 * i + 1] = static_cast<unsigned char>(masks.values[i] & 0xFF);
    }
    write_bytes(path, fmt::format("P5\n{} {}\n65535\n", masks.width, masks.height), body);
}

ScanDataset::ScanDataset(fs::path root, Manifest manifest, std::map<Side, std::vector<FrameHeader>> frames,
                         std::map<Side, FiducialObservation> fiducials, std::optional<GroundTruth> truth)
    : root_(std::move(root)), manifest_(std::move(manifest)), frames_(std::move(frames)),
      fiducials_(std::move(fiducials)), truth_(std::move(truth)) {}

int ScanDataset::frame_count(Side side) const {
    const auto it = frames_.find(side);
    return it == frames_.end() ? 0 : static_cast<int>(it->second.size());
}

const std::vector<FrameHeader>& ScanDataset::headers(Side side) const {
    const auto it = frames_.find(side);
    if (it == frames_.end()) {
        throw ValidationError(fmt::format("side {} not present in dataset '{}'", to_string(side), root_.string()));
    }
    return it->second;
}

FrameRecord ScanDataset::frame(Side side, int frame_index) const {
    const auto& hs = headers(side);
    if (frame_index < 0 || frame_index >= static_cast<int>(hs.size())) {
        throw DomainError(fmt::format("frame index {} out of range for side {}", frame_index, to_string(side)));
    }
    const FrameHeader& h = hs[static_cast<std::size_t>(frame_index)];
    FrameRecord f;
    f.frame_index = h.frame_index;
    f.side = side;
    f.pose = h.pose;
    f.intrinsics = h.intrinsics;
    f.depth = read_depth_f32(h.depth_path, h.intrinsics.width, h.intrinsics.height);
    f.masks = read_mask_pgm(h.mask_path);
    if (f.masks.width != f.depth.width || f.masks.height != f.depth.height) {
        throw DatasetError(DatasetErrorKind::DimensionMismatch,
                           fmt::format("dimension mismatch: masks '{}' vs depth '{}'", h.mask_path.string(),
                                       h.depth_path.string()));
    }
    return f;
}

FiducialObservation ScanDataset::fiducial(Side side) const {
    const auto it = fiducials_.find(side);
    if (it == fiducials_.end()) {
        throw DatasetError(DatasetErrorKind::MissingFiducial, fmt::format("fiducial missing for side {}", to_string(side)));
    }
    return it->second;
}

ScanDataset load_dataset(const fs::path& root) {
    if (!fs::is_directory(root)) {
        throw MissingFileError(fmt::format("dataset root '{}' does not exist or is not a directory", root.string()));
    }
    const fs::path manifest_path = root / "manifest.json";
    if (!fs::is_regular_file(manifest_path)) {
        throw MissingFileError(fmt::format("missing manifest '{}'", manifest_path.string()));
    }

    Manifest manifest;
    try {
        const json m = read_json_file(manifest_path);
        manifest.format_version = m.at("format_version").get<std::string>();
        manifest.units = m.at("units").get<std::string>();
        manifest.axis_convention = m.value("axis_convention", manifest.axis_convention);
        manifest.dataset_id = m.value("dataset_id", root.filename().string());
        manifest.sides.clear();
        for (const auto& s : m.at("sides")) {
            manifest.sides.push_back(parse_side(s.get<std::string>()));
        }
    } catch (const json::exception& e) {
        fail(DatasetErrorKind::BadManifest, fmt::format("bad manifest '{}': {}", manifest_path.string(), e.what()));
    } catch (const ValidationError& e) {
        fail(DatasetErrorKind::BadManifest, fmt::format("bad manifest '{}': {}", manifest_path.string(), e.what()));
    }
    if (manifest.format_version != "1") {
        fail(DatasetErrorKind::BadManifest, fmt::format("unsupported format_version \"{}\" in '{}'",
                                                        manifest.format_version, manifest_path.string()));
    }
    if (manifest.units != "meters") {
        fail(DatasetErrorKind::BadManifest,
             fmt::format("units must be \"meters\", got \"{}\" in '{}'", manifest.units, manifest_path.string()));
    }
    {
        auto sorted = manifest.sides;
        std::sort(sorted.begin(), sorted.end());
        if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) {
            fail(DatasetErrorKind::BadManifest, fmt::format("duplicate side in '{}'", manifest_path.string()));
        }
    }

    std::map<Side, std::vector<FrameHeader>> frames;
    std::map<Side, FiducialObservation> fiducials;
    for (Side side : manifest.sides) {
        const fs::path sdir = side_dir(root, side);
        const fs::path fid_path = sdir / "fiducial.json";
        if (!fs::is_regular_file(fid_path)) {
            fail(DatasetErrorKind::MissingFiducial,
                 fmt::format("fiducial missing for side {} (expected '{}')", to_string(side), fid_path.string()));
        }
        try {
            fiducials[side] = {side, pose_from_json(read_json_file(fid_path).at("pose"))};
        } catch (const json::exception& e) {
            fail(DatasetErrorKind::MalformedHeader, fmt::format("malformed fiducial '{}': {}", fid_path.string(), e.what()));
        } catch (const ValidationError& e) {
            fail(DatasetErrorKind::MalformedHeader, fmt::format("invalid fiducial '{}': {}", fid_path.string(), e.what()));
        }

        std::vector<fs::path> frame_files;
        const fs::path fdir = sdir / "frames";
        if (fs::is_directory(fdir)) {
            for (const auto& entry : fs::directory_iterator(fdir)) {
                if (entry.is_regular_file() && entry.path().extension() == ".json") {
                    frame_files.push_back(entry.path());
                }
            }
        }
        std::sort(frame_files.begin(), frame_files.end());

        std::map<int, std::pair<FrameHeader, fs::path>> by_index;
        for (const auto& fp : frame_files) {
            FrameHeader h = parse_frame_header(fp, sdir, side);
            const auto [it, inserted] = by_index.try_emplace(h.frame_index, h, fp);
            if (!inserted) {
                fail(DatasetErrorKind::DuplicateFrameIndex,
                     fmt::format("duplicate frame_index {} in '{}' and '{}'", h.frame_index,
                                 it->second.second.string(), fp.string()));
            }
        }
        auto& side_frames = frames[side];
        int expected = 0;
        for (auto& [index, entry] : by_index) {
            if (index != expected) {
                fail(DatasetErrorKind::FrameIndexGap,
                     fmt::format("side {} frame indices are not gap-free: missing {} (next is '{}')", to_string(side),
                                 expected, entry.second.string()));
            }
            validate_rasters(entry.first, entry.second);
            side_frames.push_back(std::move(entry.first));
            ++expected;
        }
    }

    std::optional<GroundTruth> truth;
    const fs::path gt_path = root / "ground_truth.json";
    if (fs::is_regular_file(gt_path)) {
        truth = load_ground_truth(gt_path.string());
    }
    return {root, std::move(manifest), std::move(frames), std::move(fiducials), std::move(truth)};
}

void save_manifest(const fs::path& root, const Manifest& manifest) {
    json sides = json::array();
    for (Side s : manifest.sides) {
        sides.push_back(std::string(to_string(s)));
    }
    write_json_file(root / "manifest.json", {{"format_version", manifest.format_version},
                                             {"units", manifest.units},
                                             {"axis_convention", manifest.axis_convention},
                                             {"sides", sides},
                                             {"dataset_id", manifest.dataset_id}});
}

void save_fiducial(const fs::path& root, const FiducialObservation& fiducial) {
    write_json_file(side_dir(root, fiducial.side) / "fiducial.json", {{"pose", pose_to_json(fiducial.pose)}});
}

void save_frame(const fs::path& root, const FrameRecord& frame) {
    const fs::path sdir = side_dir(root, frame.side);
    const std::string idx = std::to_string(frame.frame_index);
    const std::string depth_rel = "depth/" + idx + ".f32";
    const std::string mask_rel = "masks/" + idx + ".pgm";
    const auto& in = frame.intrinsics;
    write_json_file(sdir / "frames" / (idx + ".json"),
                    {{"frame_index", frame.frame_index},
                     {"pose", pose_to_json(frame.pose)},
                     {"intrinsics",
                      {{"fx", in.fx}, {"fy", in.fy}, {"cx", in.cx}, {"cy", in.cy}, {"width", in.width}, {"height", in.height}}},
                     {"depth", depth_rel},
                     {"masks", mask_rel}});
    write_depth_f32(sdir / depth_rel, frame.depth);
    write_mask_pgm(sdir / mask_rel, frame.masks);
}

std::vector<InstanceCloud> extract_instance_clouds(const FrameRecord& frame, const ExtractionConfig& cfg,
                                                   CloudFrame output) {
    std::map<std::uint16_t, PointCloud> groups;
    const auto& intr = frame.intrinsics;
    for (int row = 0; row < frame.masks.height; ++row) {
        for (int col = 0; col < frame.masks.width; ++col) {
            const std::uint16_t id = frame.masks.at(col, row);
            if (id == 0) {
                continue;
            }
            const float z = frame.depth.at(col, row);
            if (!DepthRaster::is_valid(z)) {
                continue;
            }
            const double zd = static_cast<double>(z);
            groups[id].emplace_back((col - intr.cx) * zd / intr.fx, (row - intr.cy) * zd / intr.fy, zd);
        }
    }
    std::vector<InstanceCloud> out;
    for (auto& [id, cloud] : groups) {
        if (static_cast<int>(cloud.size()) < cfg.min_points) {
            continue;
        }
        if (output == CloudFrame::SideFrame) {
            for (auto& p : cloud) {
                p = frame.pose.apply(p);
            }
        }
        out.push_back({id, std::move(cloud)});
    }
    return out;
}

}  // namespace fruitmap
