#pragma once

#include "specdep/builder.hpp"
#include "specdep/catalog.hpp"
#include "specdep/defense.hpp"
#include "specdep/dot.hpp"
#include "specdep/ir.hpp"
#include "specdep/report.hpp"
#include "specdep/tsg.hpp"
