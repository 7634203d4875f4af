#pragma once

#include "spivg/gradtape/adamw.hpp"
#include "spivg/gradtape/linear.hpp"
#include "spivg/gradtape/loss.hpp"
#include "spivg/gradtape/ops.hpp"
#include "spivg/gradtape/serialize.hpp"
#include "spivg/gradtape/tape.hpp"
#include "spivg/gradtape/tensor.hpp"
