#pragma once

#include "bsord/data.hpp"
#include "bsord/encoding.hpp"
#include "bsord/errors.hpp"
#include "bsord/metrics.hpp"
#include "bsord/model.hpp"
#include "bsord/neuralnet.hpp"
#include "bsord/serialization.hpp"
#include "bsord/standardize.hpp"
#include "bsord/svg.hpp"
#include "bsord/training.hpp"
