#pragma once

#include <cstdint>
#include <cstdio>
#include <string>
#include <string_view>
#include <vector>

namespace pothole {

// Minimal JSON emitter for machine-readable reports: insertion-ordered keys
// and fixed 12-decimal reals, so identical inputs produce identical bytes.
class JsonWriter {
public:
    static std::string format_real(double v) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.12f", v);
        return buf;
    }

    JsonWriter& begin_object() { return open('{'); }
    JsonWriter& end_object() { return close('}'); }
    JsonWriter& begin_array() { return open('['); }
    JsonWriter& end_array() { return close(']'); }

    JsonWriter& key(std::string_view k) {
        separate();
        append_string(k);
        out_ += ':';
        pending_value_ = true;
        return *this;
    }

    JsonWriter& value(std::string_view v) {
        separate();
        append_string(v);
        return *this;
    }
    JsonWriter& value(const char* v) { return value(std::string_view(v)); }
    JsonWriter& value(double v) {
        separate();
        out_ += format_real(v);
        return *this;
    }
    JsonWriter& value(std::int64_t v) {
        separate();
        out_ += std::to_string(v);
        return *this;
    }
    JsonWriter& value(std::uint64_t v) {
        separate();
        out_ += std::to_string(v);
        return *this;
    }
    JsonWriter& value(int v) { return value(static_cast<std::int64_t>(v)); }
    JsonWriter& value(bool v) {
        separate();
        out_ += v ? "true" : "false";
        return *this;
    }

    const std::string& str() const { return out_; }

private:
    JsonWriter& open(char c) {
        separate();
        out_ += c;
        first_.push_back(true);
        return *this;
    }

    JsonWriter& close(char c) {
        out_ += c;
        first_.pop_back();
        return *this;
    }

    void separate() {
        if (pending_value_) {
            pending_value_ = false;
            return;
        }
        if (!first_.empty()) {
            if (!first_.back()) out_ += ',';
            first_.back() = false;
        }
    }

    void append_string(std::string_view s) {
        out_ += '"';
        for (char c : s) {
            switch (c) {
                case '"': out_ += "\\\""; break;
                case '\\': out_ += "\\\\"; break;
                case '\n': out_ += "\\n"; break;
                case '\r': out_ += "\\r"; break;
                case '\t': out_ += "\\t"; break;
                default:
                    if (static_cast<unsigned char>(c) < 0x20) {
                        char buf[8];
                        std::snprintf(buf, sizeof buf, "\\u%04x", c);
                        out_ += buf;
                    } else {
                        out_ += c;
                    }
            }
        }
        out_ += '"';
    }

    std::string out_;
    std::vector<bool> first_;
    bool pending_value_ = false;
};

}  // namespace pothole
