import setuptools

with open("README.md", "r") as fh:
    long_description = fh.read()

setuptools.setup(
    name = "pyRespiClass",
    version = "0.1.0",
    author = "",
    author_email = "",
    description= "pyRespiClass is a python package for classifying respiratory cycles of the ICBHI lung sound database into crackle, wheeze, both and normal.",
    long_description = long_description,
    long_description_content_type = "text/markdown",
    packages = setuptools.find_packages(exclude=["test"]),
    python_requires = ">=3.9",
    install_requires = ["numpy", "scipy", "soundfile", "pandas",
                        "matplotlib", "pytz", "tqdm"],
    extras_require = {"test": ["pytest"]},
    entry_points = {"console_scripts": ["respiclass=respiclass.cli:main"]},
    classifiers=["Programming Language :: Python :: 3",
                 "License :: OSI Approved :: MIT License",
                 "Operating System :: OS Independent",
    ],
)
