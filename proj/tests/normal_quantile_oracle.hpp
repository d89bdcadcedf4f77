// Frozen reference values for the two-sided normal critical value
// C(alpha) with Phi(C) - Phi(-C) = alpha, alpha = 0.01, ..., 0.99.
// Computed independently with 40-digit arithmetic (inverse error function).
#pragma once

namespace wb_test {

struct QuantileCase { double alpha; double critical; };

inline constexpr QuantileCase kNormalQuantileOracle[99] = {
    {0.01, 0.012533469508069263161},
    {0.02, 0.025068908258711035762},
    {0.03, 0.037608287661255899666},
    {0.04, 0.050153583464733616021},
    {0.05, 0.062706777943213784067},
    {0.06, 0.075269862099829829785},
    {0.07, 0.087844837895871732239},
    {0.08, 0.10043372051146979314},
    {0.09, 0.11303854064456513599},
    {0.1, 0.12566134685507403421},
    {0.11, 0.13830420796140451595},
    {0.12, 0.15096921549677725887},
    {0.13, 0.16365848623314126389},
    {0.14, 0.1763741647808613218},
    {0.15, 0.18911842627279249011},
    {0.16, 0.20189347914185085095},
    {0.17, 0.21470156800174449471},
    {0.18, 0.22754497664114940981},
    {0.19, 0.24042603114230794684},
    {0.2, 0.2533471031357997988},
    {0.21, 0.26631061320409498117},
    {0.22, 0.27931903444745416532},
    {0.23, 0.29237489622680419251},
    {0.24, 0.30548078809939733937},
    {0.25, 0.31863936396437516302},
    {0.26, 0.33185334643681657823},
    {0.27, 0.3451255314704723318},
    {0.28, 0.35845879325119373847},
    {0.29, 0.37185608938507465959},
    {0.3, 0.38532046640756762381},
    {0.31, 0.39885506564233673171},
    {0.32, 0.4124631294414047958},
    {0.33, 0.4261480078412781764},
    {0.34, 0.43991316567323380775},
    {0.35, 0.45376219016987942578},
    {0.36, 0.46769879911450821441},
    {0.37, 0.48172684958473026523},
    {0.38, 0.49585034734745332657},
    {0.39, 0.51007345696859477078},
    {0.4, 0.52440051270804078404},
    {0.41, 0.53883603027845021876},
    {0.42, 0.55338471955567281931},
    {0.43, 0.56805149833898276644},
    {0.44, 0.58284150727121621869},
    {0.45, 0.59776012604247845565},
    {0.46, 0.61281299101662722558},
    {0.47, 0.62800601443756960204},
    {0.48, 0.64334540539291696475},
    {0.49, 0.65883769273618775612},
    {0.5, 0.6744897501960817432},
    {0.51, 0.69030882393303397022},
    {0.52, 0.70630256284008745588},
    {0.53, 0.72247905192806255471},
    {0.54, 0.73884684918521362932},
    {0.55, 0.75541502636046926379},
    {0.56, 0.77219321418868469869},
    {0.57, 0.78919165265822230658},
    {0.58, 0.80642124701824020849},
    {0.59, 0.82389363033855733498},
    {0.6, 0.84162123357291420518},
    {0.61, 0.85961736424191155033},
    {0.62, 0.87789629505122859538},
    {0.63, 0.89647336400191616758},
    {0.64, 0.91536508784281404979},
    {0.65, 0.93458929107348013882},
    {0.66, 0.95416525314619440915},
    {0.67, 0.97411387705930926174},
    {0.68, 0.99445788320975316774},
    {0.69, 1.0152220332170279713},
    {0.7, 1.0364333894937895797},
    {0.71, 1.0581216176847768411},
    {0.72, 1.0803193408149561185},
    {0.73, 1.1030625561995975391},
    {0.74, 1.1263911290388005892},
    {0.75, 1.1503493803760081783},
    {0.76, 1.1749867920660900059},
    {0.77, 1.2003588580308590588},
    {0.78, 1.2265281200366100804},
    {0.79, 1.2535654384704506491},
    {0.8, 1.281551565544600467},
    {0.81, 1.3105791121681287297},
    {0.82, 1.3407550336902163796},
    {0.83, 1.3722038089987259373},
    {0.84, 1.405071560309632556},
    {0.85, 1.4395314709384559153},
    {0.86, 1.4757910281791707352},
    {0.87, 1.5141018876192837364},
    {0.88, 1.5547735945968535411},
    {0.89, 1.5981931399228175585},
    {0.9, 1.6448536269514727149},
    {0.91, 1.6953977102721363147},
    {0.92, 1.7506860712521699794},
    {0.93, 1.8119106729525977149},
    {0.94, 1.8807936081512509389},
    {0.95, 1.9599639845400542355},
    {0.96, 2.0537489106318230529},
    {0.97, 2.1700903775845605297},
    {0.98, 2.3263478740408411009},
    {0.99, 2.575829303548900761},
};

}  // namespace wb_test
