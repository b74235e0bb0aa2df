#pragma once

#include "qneat/base64.hpp"
#include "qneat/dataset.hpp"
#include "qneat/errors.hpp"
#include "qneat/evolution.hpp"
#include "qneat/genome.hpp"
#include "qneat/math.hpp"
#include "qneat/metrics.hpp"
#include "qneat/mlpify.hpp"
#include "qneat/model.hpp"
#include "qneat/quantizer.hpp"
#include "qneat/sha256.hpp"
