#pragma once

#include "spivg/pipeline/checkpoint.hpp"
#include "spivg/pipeline/config.hpp"
#include "spivg/pipeline/evaluate.hpp"
#include "spivg/pipeline/feature_store.hpp"
#include "spivg/pipeline/model.hpp"
#include "spivg/pipeline/synthetic.hpp"
#include "spivg/pipeline/train.hpp"
