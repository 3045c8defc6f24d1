#pragma once

#include "admm.hpp"
#include "checkpoint.hpp"
#include "config.hpp"
#include "data.hpp"
#include "models.hpp"
#include "pam.hpp"
#include "pipeline.hpp"
#include "prox.hpp"
#include "prox_check.hpp"
#include "pruning.hpp"
#include "report.hpp"
#include "tensor.hpp"
#include "training.hpp"
