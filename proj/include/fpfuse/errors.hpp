#ifndef FPFUSE_ERRORS_HPP
#define FPFUSE_ERRORS_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

namespace fpfuse {

/// Base class for all library errors.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// File could not be opened, read or written.
struct IoError : Error {
    using Error::Error;
};

/// A text file violates its documented format. `line` is 1-based; 0 means
/// the error is not tied to a specific line.
struct FormatError : Error {
    std::size_t line = 0;
    explicit FormatError(const std::string& what, std::size_t line_no = 0)
        : Error(line_no ? what + " (line " + std::to_string(line_no) + ")" : what),
          line(line_no) {}
};

/// Synthetic-data profile with non-positive counts or negative noise.
struct InvalidProfile : Error {
    using Error::Error;
};

/// Fewer data points than the requested number of clusters.
struct TooFewPoints : Error {
    using Error::Error;
};

/// Graph construction on fewer than three vertices.
struct TooFewVertices : Error {
    using Error::Error;
};

/// Operation on an empty cluster.
struct EmptyCluster : Error {
    using Error::Error;
};

/// Two graphs of unequal order where a bijection is required.
struct SizeMismatch : Error {
    using Error::Error;
};

/// Face and palm sides carry different cluster counts.
struct ClusterCountMismatch : Error {
    using Error::Error;
};

/// Fused clusters of unequal length reached concatenation.
struct RaggedClusters : Error {
    using Error::Error;
};

/// Templates of different length compared.
struct DimensionMismatch : Error {
    using Error::Error;
};

struct EmptyGallery : Error {
    using Error::Error;
};

/// K outside [1, gallery size].
struct BadK : Error {
    using Error::Error;
};

struct EmptyTrials : Error {
    using Error::Error;
};

/// Reports compared over different threshold grids.
struct MismatchedGrids : Error {
    using Error::Error;
};

/// Error from a multi-stage run, annotated with the stage that raised it.
struct PipelineError : Error {
    std::string stage;
    PipelineError(const std::string& stage_name, const std::string& what)
        : Error("[" + stage_name + "] " + what), stage(stage_name) {}
};

} // namespace fpfuse

#endif // FPFUSE_ERRORS_HPP
