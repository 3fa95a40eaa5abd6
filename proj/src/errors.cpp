#include "gelgt/errors.hpp"
