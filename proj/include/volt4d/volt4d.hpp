#pragma once

#include "volt4d/adam.hpp"
#include "volt4d/blocks.hpp"
#include "volt4d/checkpoint.hpp"
#include "volt4d/conv.hpp"
#include "volt4d/dataset.hpp"
#include "volt4d/error.hpp"
#include "volt4d/gradcheck.hpp"
#include "volt4d/gradcheck_suite.hpp"
#include "volt4d/harness.hpp"
#include "volt4d/kvconfig.hpp"
#include "volt4d/layers.hpp"
#include "volt4d/metrics.hpp"
#include "volt4d/motion.hpp"
#include "volt4d/parallel.hpp"
#include "volt4d/params.hpp"
#include "volt4d/rng.hpp"
#include "volt4d/study.hpp"
#include "volt4d/synthgen.hpp"
#include "volt4d/tape.hpp"
#include "volt4d/tensor.hpp"
#include "volt4d/zoo.hpp"
