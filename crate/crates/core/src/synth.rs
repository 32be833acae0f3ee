//! Deterministic generator for flat, primitive-block models written the
//! way a modeling tool exports them: layout parameters, defaults sections,
//! configuration sets, annotations and branched lines included.

use std::io;
use std::path::Path;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::syntax::{print, ParamValue, Section, SyntaxTree};

/// Seed of the bundled corpus under `corpus/synthetic`.
pub const CORPUS_SEED: u64 = 0x5eed_2022;
pub const CORPUS_SIZE: usize = 50;

/// (source block index, source port) and its destinations.
type Wire = ((usize, u32), Vec<(usize, u32)>);

struct Kind {
    block_type: &'static str,
    base_name: &'static str,
    inputs: u32,
    outputs: u32,
}

const SOURCES: &[Kind] = &[
    Kind { block_type: "Sin", base_name: "Sine Wave", inputs: 0, outputs: 1 },
    Kind { block_type: "Constant", base_name: "Constant", inputs: 0, outputs: 1 },
    Kind { block_type: "Step", base_name: "Step", inputs: 0, outputs: 1 },
    Kind { block_type: "Inport", base_name: "In", inputs: 0, outputs: 1 },
];

const PROCESSORS: &[Kind] = &[
    Kind { block_type: "Gain", base_name: "Gain", inputs: 1, outputs: 1 },
    Kind { block_type: "Abs", base_name: "Abs", inputs: 1, outputs: 1 },
    Kind { block_type: "Saturate", base_name: "Saturation", inputs: 1, outputs: 1 },
    Kind { block_type: "UnitDelay", base_name: "Unit Delay", inputs: 1, outputs: 1 },
    Kind { block_type: "Integrator", base_name: "Integrator", inputs: 1, outputs: 1 },
    Kind { block_type: "Sum", base_name: "Sum", inputs: 2, outputs: 1 },
    Kind { block_type: "Product", base_name: "Product", inputs: 2, outputs: 1 },
];

const SINKS: &[Kind] = &[
    Kind { block_type: "Scope", base_name: "Scope", inputs: 1, outputs: 0 },
    Kind { block_type: "Display", base_name: "Display", inputs: 1, outputs: 0 },
    Kind { block_type: "Outport", base_name: "Out", inputs: 1, outputs: 0 },
    Kind { block_type: "Terminator", base_name: "Terminator", inputs: 1, outputs: 0 },
];

fn q(s: &str) -> ParamValue {
    ParamValue::quoted(s)
}

fn b(s: impl Into<String>) -> ParamValue {
    ParamValue::bare(s)
}

fn v(s: impl Into<String>) -> ParamValue {
    ParamValue::Vector(format!("[{}]", s.into()))
}

fn component(name: &str, params: &[(&str, &str)]) -> Section {
    let mut sec = Section::new(name);
    for (k, val) in params {
        let value = if val.starts_with('[') {
            ParamValue::Vector(val.to_string())
        } else if val.starts_with('"') {
            q(val.trim_matches('"'))
        } else {
            b(*val)
        };
        sec = sec.with_param(k, value);
    }
    sec
}

fn num(rng: &mut ChaCha8Rng, choices: &[&str]) -> String {
    choices.choose(rng).unwrap().to_string()
}

fn type_params(kind: &Kind, sec: &mut Section, rng: &mut ChaCha8Rng, port_no: u32) {
    let mut p = |k: &str, val: ParamValue| sec.set_param(k, val);
    match kind.block_type {
        "Sin" => {
            p("SineType", q("Time based"));
            p("Amplitude", q(&num(rng, &["1", "2", "0.5", "5"])));
            p("Frequency", q(&num(rng, &["1", "2", "10", "0.1"])));
            p("SampleTime", q("0"));
        }
        "Constant" => p("Value", q(&num(rng, &["1", "0", "3.14", "-2", "10"]))),
        "Step" => {
            p("Time", q(&num(rng, &["1", "0.5", "2"])));
            p("After", q(&num(rng, &["1", "5", "-1"])));
        }
        "Inport" | "Outport" => p("Port", q(&port_no.to_string())),
        "Gain" => {
            p("Gain", q(&num(rng, &["2", "0.5", "-1", "10", "3"])));
            p("ParamDataTypeStr", q("Inherit: Same as input"));
            p("OutDataTypeStr", q("Inherit: Same as input"));
            p("SaturateOnIntegerOverflow", b("off"));
        }
        "Saturate" => {
            p("UpperLimit", q(&num(rng, &["0.5", "1", "10"])));
            p("LowerLimit", q(&num(rng, &["-0.5", "-1", "0"])));
        }
        "UnitDelay" => {
            p("InitialCondition", q(&num(rng, &["0", "1"])));
            p("SampleTime", q(&num(rng, &["1", "0.1"])));
        }
        "Integrator" => p("InitialCondition", q(&num(rng, &["0", "1"]))),
        "Sum" => {
            p("IconShape", q("round"));
            p("Inputs", q(&num(rng, &["++", "+-", "|++"])));
            p("OutDataTypeStr", q("Inherit: Inherit via internal rule"));
        }
        "Product" => p("Inputs", q("2")),
        "Scope" => {
            p("Floating", b("off"));
            p("Location", v("188, 365, 512, 604"));
            p("Open", b("off"));
            p("NumInputPorts", q("1"));
            p("TimeRange", q("auto"));
            p("YMin", q("-5"));
            p("YMax", q("5"));
            p("SaveFormat", q("StructureWithTime"));
            p("DataFormat", q("StructureWithTime"));
        }
        "Display" => {
            p("Format", q("short"));
            p("Decimation", q("1"));
        }
        _ => {}
    }
}

struct Placed {
    name: String,
    outputs: u32,
}

/// One exported-style model; `blocks` is the target primitive block count.
fn model_tree(name: &str, rng: &mut ChaCha8Rng, blocks: usize) -> SyntaxTree {
    let mut placed: Vec<Placed> = Vec::new();
    let mut block_secs = Vec::new();
    let mut wires: Vec<Wire> = Vec::new();
    let mut sid = 0u32;
    let mut counts = std::collections::HashMap::<&str, u32>::new();
    let (mut inports, mut outports) = (0u32, 0u32);

    let mut add_block = |kind: &Kind, rng: &mut ChaCha8Rng, placed: &mut Vec<Placed>| -> usize {
        sid += 1;
        let n = counts.entry(kind.base_name).or_default();
        *n += 1;
        let port_no = match kind.block_type {
            "Inport" => {
                inports += 1;
                inports
            }
            "Outport" => {
                outports += 1;
                outports
            }
            _ => 0,
        };
        let block_name = match (kind.block_type, *n) {
            ("Inport" | "Outport", _) => format!("{}{port_no}", kind.base_name),
            (_, 1) => kind.base_name.to_string(),
            (_, k) => format!("{}{}", kind.base_name, k - 1),
        };
        let idx = placed.len();
        let x = 40 + 90 * (idx as u32 % 6);
        let y = 40 + 70 * (idx as u32 / 6);
        let mut sec = Section::new("Block")
            .with_param("BlockType", b(kind.block_type))
            .with_param("Name", q(&block_name))
            .with_param("SID", q(&sid.to_string()))
            .with_param("Ports", v(format!("{}, {}", kind.inputs, kind.outputs)))
            .with_param("Position", v(format!("{x}, {y}, {}, {}", x + 30, y + 30)))
            .with_param("ZOrder", b(sid.to_string()));
        if kind.block_type == "Sum" && rng.random_bool(0.5) {
            sec.set_param("ShowName", b("off"));
        }
        type_params(kind, &mut sec, rng, port_no);
        block_secs.push(sec);
        placed.push(Placed {
            name: block_name,
            outputs: kind.outputs,
        });
        idx
    };

    let n_sources = rng.random_range(1..=3.min(blocks.saturating_sub(1)).max(1));
    for _ in 0..n_sources {
        let k = SOURCES.choose(rng).unwrap();
        add_block(k, rng, &mut placed);
    }
    let connect = |src: usize, dst: (usize, u32), wires: &mut Vec<Wire>| {
        match wires.iter_mut().find(|w| w.0 == (src, 1)) {
            Some(w) => w.1.push(dst),
            None => wires.push(((src, 1), vec![dst])),
        }
    };
    let n_proc = blocks.saturating_sub(n_sources + 1);
    for _ in 0..n_proc {
        let k = PROCESSORS.choose(rng).unwrap();
        let producers: Vec<usize> = (0..placed.len()).filter(|&i| placed[i].outputs > 0).collect();
        let idx = add_block(k, rng, &mut placed);
        for port in 1..=k.inputs {
            // prefer the most recent producers so models grow as chains
            let pick = if rng.random_bool(0.7) {
                *producers.last().unwrap()
            } else {
                *producers.choose(rng).unwrap()
            };
            let pick = if port > 1 && pick == producers[producers.len() - 1] && producers.len() > 1 {
                producers[rng.random_range(0..producers.len() - 1)]
            } else {
                pick
            };
            connect(pick, (idx, port), &mut wires);
        }
    }
    // every unconsumed output gets a sink
    let dangling: Vec<usize> = (0..placed.len())
        .filter(|&i| placed[i].outputs > 0 && !wires.iter().any(|w| w.0 .0 == i))
        .collect();
    for src in dangling {
        let k = SINKS.choose(rng).unwrap();
        let idx = add_block(k, rng, &mut placed);
        connect(src, (idx, 1), &mut wires);
    }
    if rng.random_bool(0.4) {
        let src = rng.random_range(0..placed.len());
        if placed[src].outputs > 0 {
            let idx = add_block(&SINKS[0], rng, &mut placed);
            connect(src, (idx, 1), &mut wires);
        }
    }

    let mut system = Section::new("System")
        .with_param("Name", q(name))
        .with_param("Location", v("-8, -8, 1928, 1048"))
        .with_param("Open", b("on"))
        .with_param("ModelBrowserVisibility", b("off"))
        .with_param("ModelBrowserWidth", b("200"))
        .with_param("ScreenColor", q("white"))
        .with_param("PaperOrientation", q("landscape"))
        .with_param("PaperPositionMode", q("auto"))
        .with_param("PaperType", q("usletter"))
        .with_param("PaperUnits", q("inches"))
        .with_param("TiledPaperMargins", v("0.500000, 0.500000, 0.500000, 0.500000"))
        .with_param("TiledPageScale", b("1"))
        .with_param("ShowPageBoundaries", b("off"))
        .with_param("ZoomFactor", q("100"))
        .with_param("ReportName", q("simulink-default.rpt"))
        .with_param("SIDHighWatermark", q(&sid.to_string()));
    for sec in block_secs {
        system = system.with_child(sec);
    }
    let mut z = sid;
    for ((src, sport), dsts) in wires {
        z += 1;
        let mut line = Section::new("Line")
            .with_param("ZOrder", b(z.to_string()))
            .with_param("SrcBlock", q(&placed[src].name))
            .with_param("SrcPort", b(sport.to_string()));
        if dsts.len() == 1 {
            line = line
                .with_param("Points", v(format!("{}, 0", rng.random_range(10..60))))
                .with_param("DstBlock", q(&placed[dsts[0].0].name))
                .with_param("DstPort", b(dsts[0].1.to_string()));
        } else {
            line = line.with_param("Points", v(format!("{}, 0", rng.random_range(10..60))));
            for (d, port) in dsts {
                z += 1;
                line = line.with_child(
                    Section::new("Branch")
                        .with_param("ZOrder", b(z.to_string()))
                        .with_param("Points", v(format!("0, {}", rng.random_range(-60..60))))
                        .with_param("DstBlock", q(&placed[d].name))
                        .with_param("DstPort", b(port.to_string())),
                );
            }
        }
        system = system.with_child(line);
    }
    if rng.random_bool(0.5) {
        system = system.with_child(
            Section::new("Annotation")
                .with_param("SID", q(&(z + 1).to_string()))
                .with_param("Name", q(&format!("{name}: generated test model")))
                .with_param("Position", v("60, 16"))
                .with_param("FontName", q("Arial")),
        );
    }
    SyntaxTree::new(export_wrapper(name, system))
}

fn export_wrapper(name: &str, system: Section) -> Section {
    let config = Section::new("Simulink.ConfigSet")
        .with_param("$ObjectID", b("1"))
        .with_param("Version", q("1.15.2"))
        .with_child(
            Section::new("Array")
                .with_param("Type", q("Handle"))
                .with_param("Dimension", b("4"))
                .with_child(component(
                    "Simulink.SolverCC",
                    &[
                        ("$ObjectID", "2"),
                        ("Version", "\"1.15.2\""),
                        ("StartTime", "\"0.0\""),
                        ("StopTime", "\"10.0\""),
                        ("AbsTol", "\"auto\""),
                        ("FixedStep", "\"auto\""),
                        ("InitialStep", "\"auto\""),
                        ("MaxOrder", "5"),
                        ("ZcThreshold", "\"auto\""),
                        ("ConsecutiveZCsStepRelTol", "\"10*128*eps\""),
                        ("MaxConsecutiveZCs", "\"1000\""),
                        ("ExtrapolationOrder", "4"),
                        ("NumberNewtonIterations", "1"),
                        ("MaxStep", "\"auto\""),
                        ("MinStep", "\"auto\""),
                        ("MaxConsecutiveMinStep", "\"1\""),
                        ("RelTol", "\"1e-3\""),
                        ("SolverMode", "Auto"),
                        ("EnableConcurrentExecution", "off"),
                        ("Solver", "ode45"),
                        ("SolverName", "ode45"),
                        ("SolverJacobianMethodControl", "\"auto\""),
                        ("ShapePreserveControl", "\"DisableAll\""),
                        ("ZeroCrossControl", "\"UseLocalSettings\""),
                        ("ZeroCrossAlgorithm", "\"Nonadaptive\""),
                        ("AlgebraicLoopSolver", "\"TrustRegion\""),
                        ("SolverResetMethod", "\"Fast\""),
                        ("PositivePriorityOrder", "off"),
                        ("AutoInsertRateTranBlk", "off"),
                        ("SampleTimeConstraint", "\"Unconstrained\""),
                        ("InsertRTBMode", "\"Whenever possible\""),
                    ],
                ))
                .with_child(component(
                    "Simulink.DataIOCC",
                    &[
                        ("$ObjectID", "3"),
                        ("Version", "\"1.15.2\""),
                        ("Decimation", "\"1\""),
                        ("ExternalInput", "\"[t, u]\""),
                        ("FinalStateName", "\"xFinal\""),
                        ("InitialState", "\"xInitial\""),
                        ("LimitDataPoints", "on"),
                        ("MaxDataPoints", "\"1000\""),
                        ("LoadExternalInput", "off"),
                        ("LoadInitialState", "off"),
                        ("SaveFinalState", "off"),
                        ("SaveCompleteFinalSimState", "off"),
                        ("SaveFormat", "\"Array\""),
                        ("SignalLoggingSaveFormat", "\"Dataset\""),
                        ("SaveOutput", "on"),
                        ("SaveState", "off"),
                        ("SignalLogging", "on"),
                        ("DSMLogging", "on"),
                        ("InspectSignalLogs", "off"),
                        ("VisualizeSimOutput", "on"),
                        ("StreamToWorkspace", "off"),
                        ("StreamVariableName", "\"streamout\""),
                        ("SaveTime", "on"),
                        ("ReturnWorkspaceOutputs", "off"),
                        ("StateSaveName", "\"xout\""),
                        ("TimeSaveName", "\"tout\""),
                        ("OutputSaveName", "\"yout\""),
                        ("SignalLoggingName", "\"logsout\""),
                        ("DSMLoggingName", "\"dsmout\""),
                        ("OutputOption", "\"RefineOutputTimes\""),
                        ("OutputTimes", "\"[]\""),
                        ("ReturnWorkspaceOutputsName", "\"out\""),
                        ("Refine", "\"1\""),
                    ],
                ))
                .with_child(component(
                    "Simulink.OptimizationCC",
                    &[
                        ("$ObjectID", "4"),
                        ("Version", "\"1.15.2\""),
                        ("BlockReduction", "on"),
                        ("BooleanDataType", "on"),
                        ("ConditionallyExecuteInputs", "on"),
                        ("DefaultParameterBehavior", "\"Tunable\""),
                        ("UseDivisionForNetSlopeComputation", "\"off\""),
                        ("UseFloatMulNetSlope", "off"),
                        ("DefaultUnderspecifiedDataType", "\"double\""),
                        ("UseSpecifiedMinMax", "off"),
                        ("InlineInvariantSignals", "off"),
                        ("OptimizeBlockIOStorage", "on"),
                        ("BufferReuse", "on"),
                        ("EnhancedBackFolding", "off"),
                        ("CachingGlobalReferences", "off"),
                        ("GlobalBufferReuse", "on"),
                        ("StrengthReduction", "off"),
                        ("AdvancedOptControl", "\"\""),
                        ("ExpressionFolding", "on"),
                        ("BooleansAsBitfields", "off"),
                        ("EnableMemcpy", "on"),
                        ("MemcpyThreshold", "64"),
                        ("PassReuseOutputArgsAs", "\"Structure reference\""),
                        ("ExpressionDepthLimit", "128"),
                        ("LocalBlockOutputs", "on"),
                        ("RollThreshold", "5"),
                        ("StateBitsets", "off"),
                        ("DataBitsets", "off"),
                        ("ActiveStateOutputEnumStorageType", "\"Native Integer\""),
                        ("ZeroExternalMemoryAtStartup", "on"),
                        ("ZeroInternalMemoryAtStartup", "on"),
                        ("InitFltsAndDblsToZero", "off"),
                        ("NoFixptDivByZeroProtection", "off"),
                        ("EfficientFloat2IntCast", "off"),
                        ("EfficientMapNaN2IntZero", "on"),
                        ("LifeSpan", "\"auto\""),
                        ("MaxStackSize", "\"Inherit from target\""),
                        ("BufferReusableBoundary", "on"),
                        ("SimCompilerOptimization", "\"off\""),
                        ("AccelVerboseBuild", "off"),
                    ],
                ))
                .with_child(component(
                    "Simulink.DebuggingCC",
                    &[
                        ("$ObjectID", "5"),
                        ("Version", "\"1.15.2\""),
                        ("RTPrefix", "\"error\""),
                        ("ConsistencyChecking", "\"none\""),
                        ("ArrayBoundsChecking", "\"none\""),
                        ("SignalInfNanChecking", "\"none\""),
                        ("SignalRangeChecking", "\"none\""),
                        ("ReadBeforeWriteMsg", "\"UseLocalSettings\""),
                        ("WriteAfterWriteMsg", "\"UseLocalSettings\""),
                        ("WriteAfterReadMsg", "\"UseLocalSettings\""),
                        ("AlgebraicLoopMsg", "\"warning\""),
                        ("ArtificialAlgebraicLoopMsg", "\"warning\""),
                        ("SaveWithDisabledLinksMsg", "\"warning\""),
                        ("SaveWithParameterizedLinksMsg", "\"warning\""),
                        ("CheckSSInitialOutputMsg", "on"),
                        ("UnderspecifiedInitializationDetection", "\"Simplified\""),
                        ("MergeDetectMultiDrivingBlocksExec", "\"error\""),
                        ("CheckExecutionContextPreStartOutputMsg", "off"),
                        ("CheckExecutionContextRuntimeOutputMsg", "off"),
                        ("SignalResolutionControl", "\"UseLocalSettings\""),
                        ("BlockPriorityViolationMsg", "\"warning\""),
                        ("MinStepSizeMsg", "\"warning\""),
                        ("TimeAdjustmentMsg", "\"none\""),
                        ("MaxConsecutiveZCsMsg", "\"error\""),
                        ("MaskedZcDiagnostic", "\"warning\""),
                        ("IgnoredZcDiagnostic", "\"warning\""),
                        ("SolverPrmCheckMsg", "\"none\""),
                        ("InheritedTsInSrcMsg", "\"warning\""),
                        ("MultiTaskDSMMsg", "\"error\""),
                        ("MultiTaskCondExecSysMsg", "\"error\""),
                        ("MultiTaskRateTransMsg", "\"error\""),
                        ("SingleTaskRateTransMsg", "\"none\""),
                        ("TasksWithSamePriorityMsg", "\"warning\""),
                        ("SigSpecEnsureSampleTimeMsg", "\"warning\""),
                        ("CheckMatrixSingularityMsg", "\"none\""),
                        ("IntegerOverflowMsg", "\"warning\""),
                        ("Int32ToFloatConvMsg", "\"warning\""),
                        ("ParameterDowncastMsg", "\"error\""),
                        ("ParameterOverflowMsg", "\"error\""),
                        ("ParameterUnderflowMsg", "\"none\""),
                        ("ParameterPrecisionLossMsg", "\"warning\""),
                        ("ParameterTunabilityLossMsg", "\"warning\""),
                        ("FixptConstUnderflowMsg", "\"none\""),
                        ("FixptConstOverflowMsg", "\"none\""),
                        ("FixptConstPrecisionLossMsg", "\"none\""),
                        ("UnderSpecifiedDataTypeMsg", "\"none\""),
                        ("UnnecessaryDatatypeConvMsg", "\"none\""),
                        ("VectorMatrixConversionMsg", "\"none\""),
                        ("InvalidFcnCallConnMsg", "\"error\""),
                        ("FcnCallInpInsideContextMsg", "\"error\""),
                        ("SignalLabelMismatchMsg", "\"none\""),
                        ("UnconnectedInputMsg", "\"warning\""),
                        ("UnconnectedOutputMsg", "\"warning\""),
                        ("UnconnectedLineMsg", "\"warning\""),
                        ("SFcnCompatibilityMsg", "\"none\""),
                        ("FrameProcessingCompatibilityMsg", "\"error\""),
                        ("UniqueDataStoreMsg", "\"none\""),
                        ("BusObjectLabelMismatch", "\"warning\""),
                        ("RootOutportRequireBusObject", "\"warning\""),
                        ("AssertControl", "\"UseLocalSettings\""),
                        ("ModelReferenceIOMsg", "\"none\""),
                        ("ModelReferenceVersionMismatchMessage", "\"none\""),
                        ("UnknownTsInhSupMsg", "\"warning\""),
                        ("ModelReferenceDataLoggingMessage", "\"warning\""),
                        ("StateNameClashWarn", "\"none\""),
                        ("SimStateInterfaceChecksumMismatchMsg", "\"warning\""),
                        ("StrictBusMsg", "\"ErrorLevel1\""),
                        ("BusNameAdapt", "\"WarnAndRepair\""),
                        ("NonBusSignalsTreatedAsBus", "\"none\""),
                        ("SFUnusedDataAndEventsDiag", "\"warning\""),
                        ("SFUnexpectedBacktrackingDiag", "\"warning\""),
                        ("SFInvalidInputDataAccessInChartInitDiag", "\"warning\""),
                        ("SFNoUnconditionalDefaultTransitionDiag", "\"warning\""),
                        ("SFTransitionOutsideNaturalParentDiag", "\"warning\""),
                    ],
                )),
        )
        .with_param("Name", q("Configuration"))
        .with_param("CurrentDlgPage", q("Solver"))
        .with_param("ConfigPrmDlgPosition", v("400, 200, 1480, 940"));
    Section::new("Model")
        .with_param("Name", q(name))
        .with_param("Version", b("9.0"))
        .with_param("SavedCharacterEncoding", q("UTF-8"))
        .with_param("Description", q(""))
        .with_param("Created", q("Thu Mar 01 10:00:00 2018"))
        .with_param("Creator", q("generator"))
        .with_param("UpdateHistory", q("UpdateHistoryNever"))
        .with_param("ModifiedByFormat", q("%<Auto>"))
        .with_param("LastModifiedBy", q("generator"))
        .with_param("ModifiedDateFormat", q("%<Auto>"))
        .with_param("LastModifiedDate", q("Thu Mar 01 10:00:00 2018"))
        .with_param("ModelVersionFormat", q("1.%<AutoIncrement:4>"))
        .with_param("SampleTimeColors", b("off"))
        .with_param("WideLines", b("off"))
        .with_param("ShowLineDimensions", b("off"))
        .with_param("ShowPortDataTypes", b("off"))
        .with_param("ShowStorageClass", b("off"))
        .with_param("ExecutionOrder", b("off"))
        .with_param("BrowserShowLibraryLinks", b("off"))
        .with_param("BrowserLookUnderMasks", b("off"))
        .with_param("StopTime", q("10.0"))
        .with_child(
            Section::new("GraphicalInterface")
                .with_param("NumRootInports", b("0"))
                .with_param("NumRootOutports", b("0"))
                .with_param("ParameterArgumentNames", q(""))
                .with_param("ComputedModelVersion", q("1.4"))
                .with_param("NumModelReferences", b("0"))
                .with_param("NumTestPointedSignals", b("0")),
        )
        .with_child(
            Section::new("Array")
                .with_param("Type", q("Handle"))
                .with_param("Dimension", b("1"))
                .with_child(config),
        )
        .with_child(
            Section::new("BlockDefaults")
                .with_param("ForegroundColor", q("black"))
                .with_param("BackgroundColor", q("white"))
                .with_param("DropShadow", b("off"))
                .with_param("NamePlacement", q("normal"))
                .with_param("FontName", q("Helvetica"))
                .with_param("FontSize", b("10"))
                .with_param("FontWeight", q("normal"))
                .with_param("FontAngle", q("normal"))
                .with_param("ShowName", b("on")),
        )
        .with_child(
            Section::new("AnnotationDefaults")
                .with_param("HorizontalAlignment", q("center"))
                .with_param("VerticalAlignment", q("middle"))
                .with_param("ForegroundColor", q("black"))
                .with_param("BackgroundColor", q("white"))
                .with_param("DropShadow", b("off"))
                .with_param("FontName", q("Helvetica"))
                .with_param("FontSize", b("10")),
        )
        .with_child(
            Section::new("LineDefaults")
                .with_param("FontName", q("Helvetica"))
                .with_param("FontSize", b("9"))
                .with_param("FontWeight", q("normal"))
                .with_param("FontAngle", q("normal")),
        )
        .with_child(system)
}

/// Model number `index` of the corpus drawn from `seed`.
pub fn synth_model(seed: u64, index: usize) -> (String, SyntaxTree) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(index as u64));
    let name = format!("synth_{index:03}");
    let blocks = rng.random_range(3..=10);
    let tree = model_tree(&name, &mut rng, blocks);
    (name, tree)
}

/// `(file name, text)` for every model of a corpus.
pub fn synth_corpus(seed: u64, count: usize) -> Vec<(String, String)> {
    (0..count)
        .map(|i| {
            let (name, tree) = synth_model(seed, i);
            (format!("{name}.mdl"), print(&tree))
        })
        .collect()
}

pub fn write_corpus(dir: &Path, seed: u64, count: usize) -> io::Result<()> {
    std::fs::create_dir_all(dir)?;
    for (file, text) in synth_corpus(seed, count) {
        std::fs::write(dir.join(file), text)?;
    }
    Ok(())
}

/// A larger exported-style model used to measure simplification.
pub fn export_fixture() -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    print(&model_tree("export_style", &mut rng, 14))
}

/// A model whose only functional block is a subsystem.
pub fn hierarchical_fixture() -> String {
    let inner = Section::new("System")
        .with_param("Name", q("Controller"))
        .with_child(
            Section::new("Block")
                .with_param("BlockType", b("Inport"))
                .with_param("Name", q("In1"))
                .with_param("Port", q("1")),
        )
        .with_child(
            Section::new("Block")
                .with_param("BlockType", b("Outport"))
                .with_param("Name", q("Out1"))
                .with_param("Port", q("1")),
        )
        .with_child(
            Section::new("Line")
                .with_param("SrcBlock", q("In1"))
                .with_param("SrcPort", b("1"))
                .with_param("DstBlock", q("Out1"))
                .with_param("DstPort", b("1")),
        );
    let system = Section::new("System")
        .with_param("Name", q("hierarchical"))
        .with_child(
            Section::new("Block")
                .with_param("BlockType", b("Constant"))
                .with_param("Name", q("Constant"))
                .with_param("Value", q("1")),
        )
        .with_child(
            Section::new("Block")
                .with_param("BlockType", b("SubSystem"))
                .with_param("Name", q("Controller"))
                .with_param("Ports", v("1, 1"))
                .with_child(inner),
        )
        .with_child(
            Section::new("Block")
                .with_param("BlockType", b("Outport"))
                .with_param("Name", q("Out1"))
                .with_param("Port", q("1")),
        )
        .with_child(
            Section::new("Line")
                .with_param("SrcBlock", q("Constant"))
                .with_param("SrcPort", b("1"))
                .with_param("DstBlock", q("Controller"))
                .with_param("DstPort", b("1")),
        )
        .with_child(
            Section::new("Line")
                .with_param("SrcBlock", q("Controller"))
                .with_param("SrcPort", b("1"))
                .with_param("DstBlock", q("Out1"))
                .with_param("DstPort", b("1")),
        );
    print(&SyntaxTree::new(
        Section::new("Model").with_param("Name", q("hierarchical")).with_child(system),
    ))
}
