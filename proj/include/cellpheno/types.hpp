#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace cellpheno {

// Dense image planes. Indexing convention everywhere: plane(y, x) with y the
// row (top to bottom) and x the column (left to right).
template <typename Scalar>
using Plane = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

using PlaneD = Plane<double>;
using PlaneU8 = Plane<std::uint8_t>;
using PlaneU16 = Plane<std::uint16_t>;
using PlaneI = Plane<std::int32_t>;

enum class Group { MUT, WT };

const char* to_string(Group g);
Group parse_group(const std::string& s);  // case-insensitive; throws BadLabel

/// One annotated tumor-region tile with its cohort label.
struct RegionImage {
  std::string id;
  Group group = Group::MUT;
  PlaneU8 r, g, b;
  std::optional<double> pixel_size_um;

  Eigen::Index rows() const { return r.rows(); }
  Eigen::Index cols() const { return r.cols(); }
};

enum class ValueRange { OpticalDensity, Likelihood, Intensity };

/// Single-channel real-valued image with a semantic tag for its value scale.
struct ScalarImage {
  PlaneD values;
  ValueRange range = ValueRange::Intensity;

  Eigen::Index rows() const { return values.rows(); }
  Eigen::Index cols() const { return values.cols(); }
};

struct PixelCoord {
  std::int32_t x = 0;  // column
  std::int32_t y = 0;  // row

  friend bool operator==(const PixelCoord& a, const PixelCoord& b) {
    return a.x == b.x && a.y == b.y;
  }
  friend bool operator<(const PixelCoord& a, const PixelCoord& b) {
    return a.y != b.y ? a.y < b.y : a.x < b.x;
  }
};

/// One segmented cell: closed boundary contour plus interior pixel set.
/// The mask is 4-connected, hole-free and includes the boundary pixels;
/// mask pixels are kept sorted row-major so instances compare cheaply.
struct CellInstance {
  std::string cell_id;
  std::string image_id;
  std::vector<PixelCoord> boundary;  // ordered, closed (last step returns to front)
  std::vector<PixelCoord> mask;
};

// ---------------------------------------------------------------------------
// Error taxonomy. InputError covers missing/ill-formed inputs (CLI exit 2);
// every other PipelineError is an invariant violation (CLI exit 3).
// ---------------------------------------------------------------------------

struct PipelineError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InputError : PipelineError {
  using PipelineError::PipelineError;
};

struct IoError : InputError {
  using InputError::InputError;
};
struct ConfigError : InputError {
  using InputError::InputError;
};
struct MissingImage : InputError {
  using InputError::InputError;
};
struct DuplicateId : InputError {
  using InputError::InputError;
};
struct BadLabel : InputError {
  using InputError::InputError;
};

struct OverlapError : PipelineError {
  using PipelineError::PipelineError;
};
struct SingularStains : PipelineError {
  using PipelineError::PipelineError;
};
struct TooSmall : PipelineError {
  using PipelineError::PipelineError;
};
struct DegenerateLabels : PipelineError {
  using PipelineError::PipelineError;
};
struct StratificationError : PipelineError {
  using PipelineError::PipelineError;
};
struct BadDissimilarity : PipelineError {
  using PipelineError::PipelineError;
};
struct BadK : PipelineError {
  using PipelineError::PipelineError;
};
struct PlacementError : PipelineError {
  using PipelineError::PipelineError;
};

}  // namespace cellpheno
