#pragma once

#include "dropfam/bounds/bound_report.hpp"
#include "dropfam/bounds/enumerate.hpp"
#include "dropfam/bounds/jensen_gap.hpp"
#include "dropfam/bounds/kl_check.hpp"
#include "dropfam/family/buckets.hpp"
#include "dropfam/family/evaluator.hpp"
#include "dropfam/family/power_mean.hpp"
#include "dropfam/harness/checkpoint.hpp"
#include "dropfam/harness/config.hpp"
#include "dropfam/harness/data.hpp"
#include "dropfam/harness/sweep.hpp"
#include "dropfam/harness/temperature.hpp"
#include "dropfam/harness/train.hpp"
#include "dropfam/model/dropout.hpp"
#include "dropfam/model/loss.hpp"
#include "dropfam/model/lstm.hpp"
#include "dropfam/model/mlp.hpp"
#include "dropfam/numeric/grad_check.hpp"
#include "dropfam/numeric/log_ops.hpp"
#include "dropfam/numeric/rng.hpp"
#include "dropfam/numeric/tensor.hpp"
