#pragma once

#include "dropout_sgd/errors.hpp"
#include "dropout_sgd/linalg.hpp"
#include "dropout_sgd/inference.hpp"
#include "dropout_sgd/randgen.hpp"
#include "dropout_sgd/dropout_moments.hpp"
#include "dropout_sgd/gd_dropout.hpp"
#include "dropout_sgd/sgd_dropout.hpp"
#include "dropout_sgd/longrun_cov.hpp"
#include "dropout_sgd/experiments.hpp"
