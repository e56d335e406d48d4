#pragma once

#include <string>

#include "sna/characterize.hpp"
#include "sna/mor.hpp"
#include "sna/simcore.hpp"
#include "sna/vccs_table.hpp"

namespace sna {

// CSV artifact formats. All writers are atomic (write temp, then rename) and
// print doubles with 17 significant digits so reruns are byte-identical.

void write_waveform_csv(const std::string& path, const Waveform& w);
Waveform read_waveform_csv(const std::string& path);

// header vin_v,vout_v,i_a ; row-major, vin outer
void write_vccs_csv(const std::string& path, const VccsTable& t);
VccsTable read_vccs_csv(const std::string& path);

// header width_s,amplitude_v
void write_nrc_csv(const std::string& path, const NoiseRejectionCurve& c);
NoiseRejectionCurve read_nrc_csv(const std::string& path);

// net,c_near_f,r_ohms,c_far_f rows then coupling,netA,netB,c_f rows
void write_coupled_pi_csv(const std::string& path, const CoupledPiModel& m);
CoupledPiModel read_coupled_pi_csv(const std::string& path);

// header r_th_ohms,t0_s,slew_s,v_start_v,v_end_v ; single row
void write_thevenin_csv(const std::string& path, const TheveninDriver& d);
TheveninDriver read_thevenin_csv(const std::string& path);

void write_text_atomic(const std::string& path, const std::string& content);
std::string read_text(const std::string& path);
std::string format_double(double x);

}  // namespace sna
