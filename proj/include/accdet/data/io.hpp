#pragma once
// File formats: sensor/crash CSVs and the site layout key-value file.
//
//   sensor CSV:  timestamp,sensor_id,occupancy,flow,headway,density,speed,capacity
//   crash CSV:   timestamp,site_id,on_target_highway
//   layout:      site_id = ...           (one line)
//                sensor  = id,dir,lane,milepost   (repeated, file order = column order)
#include <charconv>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "accdet/config.hpp"
#include "accdet/data/types.hpp"

namespace accdet {

namespace detail {

inline double parse_double_field(std::string_view field, const std::string& path, int line_no, const char* name) {
    double out = 0.0;
    const auto res = std::from_chars(field.data(), field.data() + field.size(), out);
    if (res.ec != std::errc{} || res.ptr != field.data() + field.size())
        fail(path, ":", line_no, ": malformed ", name, " value '", std::string(field), "'");
    return out;
}

inline std::int64_t parse_int_field(std::string_view field, const std::string& path, int line_no, const char* name) {
    std::int64_t out = 0;
    const auto res = std::from_chars(field.data(), field.data() + field.size(), out);
    if (res.ec != std::errc{} || res.ptr != field.data() + field.size())
        fail(path, ":", line_no, ": malformed ", name, " value '", std::string(field), "'");
    return out;
}

}  // namespace detail

inline const char* kSensorCsvHeader = "timestamp,sensor_id,occupancy,flow,headway,density,speed,capacity";
inline const char* kCrashCsvHeader = "timestamp,site_id,on_target_highway";

// Readings sorted by (sensor_id, timestamp); unknown sensors are rejected.
// Out-of-range values are accepted here and handled by cleanse().
inline std::vector<SensorReading> ingest_sensor_csv(const std::string& path, const SiteLayout& layout) {
    std::ifstream in(path);
    require(in.good(), "cannot open sensor CSV '", path, "'");
    std::string line;
    require(static_cast<bool>(std::getline(in, line)), path, ": empty file (missing header)");
    require(trim(line) == kSensorCsvHeader, path, ":1: bad header, expected '", kSensorCsvHeader, "'");

    std::vector<SensorReading> readings;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto fields = split(line, ',');
        require(fields.size() == 8, path, ":", line_no, ": expected 8 fields, got ", fields.size());
        SensorReading r;
        r.timestamp = detail::parse_int_field(fields[0], path, line_no, "timestamp");
        r.sensor_id = fields[1];
        require(layout.sensor_index(r.sensor_id) >= 0, path, ":", line_no, ": unknown sensor '", r.sensor_id, "'");
        r.occupancy = detail::parse_double_field(fields[2], path, line_no, "occupancy");
        r.flow = detail::parse_double_field(fields[3], path, line_no, "flow");
        r.headway = detail::parse_double_field(fields[4], path, line_no, "headway");
        r.density = detail::parse_double_field(fields[5], path, line_no, "density");
        r.speed = detail::parse_double_field(fields[6], path, line_no, "speed");
        r.capacity = detail::parse_double_field(fields[7], path, line_no, "capacity");
        require(r.timestamp % kRawIntervalSeconds == 0, path, ":", line_no, ": timestamp ", r.timestamp,
                " not aligned to the ", kRawIntervalSeconds, " s grid");
        readings.push_back(std::move(r));
    }
    std::sort(readings.begin(), readings.end(), [](const SensorReading& a, const SensorReading& b) {
        if (a.sensor_id != b.sensor_id) return a.sensor_id < b.sensor_id;
        return a.timestamp < b.timestamp;
    });
    return readings;
}

inline std::vector<CrashRecord> ingest_crash_csv(const std::string& path) {
    std::ifstream in(path);
    require(in.good(), "cannot open crash CSV '", path, "'");
    std::string line;
    require(static_cast<bool>(std::getline(in, line)), path, ": empty file (missing header)");
    require(trim(line) == kCrashCsvHeader, path, ":1: bad header, expected '", kCrashCsvHeader, "'");
    std::vector<CrashRecord> records;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto fields = split(line, ',');
        require(fields.size() == 3, path, ":", line_no, ": expected 3 fields, got ", fields.size());
        CrashRecord r;
        r.timestamp = detail::parse_int_field(fields[0], path, line_no, "timestamp");
        r.site_id = fields[1];
        if (fields[2] == "1" || fields[2] == "true")
            r.on_target_highway = true;
        else if (fields[2] == "0" || fields[2] == "false")
            r.on_target_highway = false;
        else
            fail(path, ":", line_no, ": malformed on_target_highway value '", fields[2], "'");
        records.push_back(std::move(r));
    }
    return records;
}

inline SiteLayout load_layout(const std::string& path) {
    const KeyValueFile kv = KeyValueFile::load(path);
    SiteLayout layout;
    layout.site_id = kv.get_or("site_id", "");
    for (const auto& entry : kv.get_all("sensor")) {
        const auto fields = split(entry, ',');
        require(fields.size() == 4, path, ": sensor entry '", entry, "' needs id,direction,lane,milepost");
        SensorInfo s;
        s.id = fields[0];
        s.direction = fields[1];
        require(s.direction == "+" || s.direction == "-", path, ": sensor '", s.id, "': direction must be + or -");
        s.lane = static_cast<int>(detail::parse_int_field(fields[2], path, 0, "lane"));
        s.milepost = detail::parse_double_field(fields[3], path, 0, "milepost");
        layout.sensors.push_back(std::move(s));
    }
    layout.validate();
    return layout;
}

inline void save_layout(const std::string& path, const SiteLayout& layout) {
    std::ofstream out(path);
    require(out.good(), "cannot write layout '", path, "'");
    out << "site_id = " << layout.site_id << "\n";
    char buf[160];
    for (const auto& s : layout.sensors) {
        std::snprintf(buf, sizeof buf, "sensor = %s,%s,%d,%.4f", s.id.c_str(), s.direction.c_str(), s.lane,
                      s.milepost);
        out << buf << "\n";
    }
}

inline void write_sensor_csv(const std::string& path, const std::vector<SensorReading>& readings) {
    std::ofstream out(path);
    require(out.good(), "cannot write sensor CSV '", path, "'");
    out << kSensorCsvHeader << "\n";
    char buf[256];
    for (const auto& r : readings) {
        std::snprintf(buf, sizeof buf, "%lld,%s,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f",
                      static_cast<long long>(r.timestamp), r.sensor_id.c_str(), r.occupancy, r.flow, r.headway,
                      r.density, r.speed, r.capacity);
        out << buf << "\n";
    }
}

inline void write_crash_csv(const std::string& path, const std::vector<CrashRecord>& records) {
    std::ofstream out(path);
    require(out.good(), "cannot write crash CSV '", path, "'");
    out << kCrashCsvHeader << "\n";
    for (const auto& r : records)
        out << r.timestamp << "," << r.site_id << "," << (r.on_target_highway ? 1 : 0) << "\n";
}

}  // namespace accdet
