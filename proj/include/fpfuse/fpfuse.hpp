#ifndef FPFUSE_FPFUSE_HPP
#define FPFUSE_FPFUSE_HPP

// Umbrella header for the fpfuse library.

#include "fpfuse/clustering.hpp"
#include "fpfuse/correspondence.hpp"
#include "fpfuse/errors.hpp"
#include "fpfuse/evaluation.hpp"
#include "fpfuse/fusion.hpp"
#include "fpfuse/graph_mapping.hpp"
#include "fpfuse/keypoint.hpp"
#include "fpfuse/keypoint_io.hpp"
#include "fpfuse/matching.hpp"
#include "fpfuse/pipeline.hpp"
#include "fpfuse/synthetic.hpp"

#endif // FPFUSE_FPFUSE_HPP
