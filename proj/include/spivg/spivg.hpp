#pragma once

#include "spivg/error.hpp"
#include "spivg/fusion.hpp"
#include "spivg/gradtape.hpp"
#include "spivg/metrics.hpp"
#include "spivg/pipeline.hpp"
#include "spivg/random.hpp"
#include "spivg/reasoner.hpp"
#include "spivg/spike.hpp"
#include "spivg/summarize.hpp"
#include "spivg/textfuse.hpp"
