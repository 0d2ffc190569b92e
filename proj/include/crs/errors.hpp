#pragma once

#include <stdexcept>
#include <string>

namespace crs {

/// Bad or inconsistent user-supplied input (files, flags, request bodies).
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace crs
